// Copyright 2026 The MSTN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "mstn/batch.hpp"
#include "mstn/dataset.hpp"
#include "mstn/error.hpp"
#include "mstn/synthetic.hpp"
#include "mstn/vocab.hpp"

using namespace mstn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("mstn_data_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

using Words = std::vector<std::string>;

}  // namespace

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("What color is the door?"), (Words{"what", "color", "is", "the", "door", "?"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_EQ(tokenize("  Yes, it IS!  "), (Words{"yes", ",", "it", "is", "!"}));
  EXPECT_EQ(tokenize("wait...?"), (Words{"wait", ".", ".", ".", "?"}));
  EXPECT_EQ(tokenize("?"), (Words{"?"}));
}

TEST(Tokenize, IdempotentOverRandomStrings) {
  std::mt19937 gen(3);
  const std::string alphabet = "abcXYZ .,?!\t";
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const int len = static_cast<int>(gen() % 30);
    for (int i = 0; i < len; ++i) s += alphabet[gen() % alphabet.size()];
    const auto once = tokenize(s);
    EXPECT_EQ(tokenize(detokenize(once)), once) << "input: '" << s << "'";
  }
}

TEST(Vocab, ReservedIds) {
  Vocab v;
  EXPECT_EQ(v.size(), kReservedTokens);
  EXPECT_EQ(v.token(kPadId), "<pad>");
  EXPECT_EQ(v.token(kSosId), "<sos>");
  EXPECT_EQ(v.token(kEosId), "<eos>");
  EXPECT_EQ(v.token(kUnkId), "<unk>");
  EXPECT_EQ(v.token(kSepId), "<sep>");
}

TEST(Vocab, FrequencyThenLexicographicOrder) {
  const std::vector<std::string> corpus = {"a a b"};
  Vocab v = Vocab::build_from_text(corpus);
  EXPECT_LT(v.id("a"), v.id("b"));
  const std::vector<std::string> ties = {"zeta beta alpha"};
  Vocab t = Vocab::build_from_text(ties);
  EXPECT_EQ(t.token(5), "alpha");
  EXPECT_EQ(t.token(6), "beta");
  EXPECT_EQ(t.token(7), "zeta");
  const std::vector<std::string> rare = {"a b"};
  Vocab r = Vocab::build_from_text(rare, 2);
  EXPECT_EQ(r.id("a"), kUnkId);
  EXPECT_EQ(r.id("b"), kUnkId);
  EXPECT_EQ(Vocab::build_from_text({}).size(), kReservedTokens);
  EXPECT_THROW(Vocab::build_from_text(corpus, 0), ConfigError);
}

TEST(Vocab, RoundTripsAndDecodes) {
  const std::vector<std::string> corpus = {"the door is red", "the car is blue ."};
  Vocab v = Vocab::build_from_text(corpus);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_EQ(v.id(v.token(static_cast<std::int64_t>(i))), static_cast<std::int64_t>(i));
  }
  const fs::path dir = temp_dir("vocab");
  v.save(dir / "v.txt");
  EXPECT_TRUE(Vocab::load(dir / "v.txt") == v);
  EXPECT_TRUE(Vocab::build_from_text(corpus) == v);
  write_text(dir / "bad.txt", "<pad>\n<sos>\nfoo\n");
  EXPECT_THROW(Vocab::load(dir / "bad.txt"), DataError);
  const std::vector<std::int64_t> ids = {kSosId, v.id("the"), kPadId, v.id("door"), kEosId, v.id("red")};
  EXPECT_EQ(v.decode(ids), (Words{"the", "door"}));
}

TEST(Features, RoundTripIsBitExact) {
  const fs::path dir = temp_dir("feat");
  FeatureMatrix f{2, 3, {0.1, -2.5, 3.0, 1e-3, 7.25, -0.0}};
  quantize_to_f32(f);
  write_features(dir / "f.bin", f);
  EXPECT_EQ(read_features(dir / "f.bin"), f);
  const std::string raw = slurp(dir / "f.bin");
  EXPECT_EQ(raw.substr(0, 4), "FEAT");
  EXPECT_EQ(raw.size(), 4u + 4u + 8u + 8u + 6u * 4u);
}

TEST(Features, RejectsCorruptFiles) {
  const fs::path dir = temp_dir("feat_bad");
  FeatureMatrix f{1, 2, {1.0, 2.0}};
  write_features(dir / "f.bin", f);
  std::string raw = slurp(dir / "f.bin");
  write_text(dir / "magic.bin", "FEAX" + raw.substr(4));
  EXPECT_THROW(read_features(dir / "magic.bin"), DataError);
  write_text(dir / "short.bin", raw.substr(0, raw.size() - 2));
  EXPECT_THROW(read_features(dir / "short.bin"), DataError);
  write_text(dir / "long.bin", raw + "xxxx");
  EXPECT_THROW(read_features(dir / "long.bin"), DataError);
  std::string nan_raw = raw;
  const float nan = std::nanf("");
  std::memcpy(nan_raw.data() + 24, &nan, 4);
  write_text(dir / "nan.bin", nan_raw);
  EXPECT_THROW(read_features(dir / "nan.bin"), DataError);
  EXPECT_THROW(read_features(dir / "missing.bin"), DataError);
}

class DatasetFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = temp_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir / "f");
    write_features(dir / "f/v.bin", FeatureMatrix{2, 3, {1, 2, 3, 4, 5, 6}});
    write_features(dir / "f/a.bin", FeatureMatrix{1, 2, {0.5, 0.25}});
  }
  fs::path dir;
};

TEST_F(DatasetFiles, LoadsRecordsAndNullCaption) {
  write_text(dir / "d.jsonl",
             R"({"question":"What color?","history":[["hi","hello"]],"caption":null,"video":"f/v.bin","audio":"f/a.bin","answer":"Red."})"
             "\n");
  const auto ds = load_dataset(dir / "d.jsonl");
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].question, (Words{"what", "color", "?"}));
  EXPECT_TRUE(ds[0].caption.empty());
  ASSERT_EQ(ds[0].history.size(), 1u);
  EXPECT_EQ(ds[0].history[0].answer, (Words{"hello"}));
  EXPECT_EQ(ds[0].answer, (Words{"red", "."}));
  EXPECT_EQ(ds[0].video.rows, 2u);
  EXPECT_EQ(ds[0].audio.cols, 2u);
}

TEST_F(DatasetFiles, EmptyFileIsEmptyList) {
  write_text(dir / "d.jsonl", "");
  EXPECT_TRUE(load_dataset(dir / "d.jsonl").empty());
}

TEST_F(DatasetFiles, ErrorsNameTheLine) {
  const std::string good =
      R"({"question":"q","history":[],"caption":"c","video":"f/v.bin","audio":"f/a.bin","answer":"a"})";
  auto expect_error = [&](const std::string& second_line, const std::string& needle) {
    write_text(dir / "d.jsonl", good + "\n" + second_line + "\n");
    try {
      load_dataset(dir / "d.jsonl");
      ADD_FAILURE() << "no error for " << second_line;
    } catch (const DataError& e) {
      const std::string msg = e.what();
      EXPECT_NE(msg.find(":2:"), std::string::npos) << msg;
      EXPECT_NE(msg.find(needle), std::string::npos) << msg;
    }
  };
  expect_error("{not json", "");
  expect_error(R"({"history":[],"caption":"c","video":"f/v.bin","audio":"f/a.bin","answer":"a"})",
               "question");
  expect_error(R"({"question":"q","history":[],"caption":"c","video":"f/v.bin","audio":"f/a.bin","answer":""})",
               "answer");
  expect_error(R"({"question":"q","history":[],"caption":"c","video":"f/nope.bin","audio":"f/a.bin","answer":"a"})",
               "nope");
  // Video dimension differs from the first record.
  write_features(dir / "f/v4.bin", FeatureMatrix{1, 4, {1, 2, 3, 4}});
  expect_error(R"({"question":"q","history":[],"caption":"c","video":"f/v4.bin","audio":"f/a.bin","answer":"a"})",
               "dim");
}

TEST(Dataset, SaveLoadSaveIsByteIdentical) {
  const fs::path dir = temp_dir("roundtrip");
  SyntheticTaskSpec spec;
  spec.attributes = 4;
  const auto ds = generate_synthetic(spec, 20, 5);
  save_dataset(dir / "a.jsonl", ds.examples);
  const auto loaded = load_dataset(dir / "a.jsonl");
  ASSERT_EQ(loaded.size(), ds.examples.size());
  EXPECT_EQ(loaded, ds.examples);
  const fs::path dir2 = temp_dir("roundtrip2");
  save_dataset(dir2 / "a.jsonl", loaded);
  EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir2 / "a.jsonl"));
  EXPECT_EQ(slurp(dir / ds.examples[3].video_path), slurp(dir2 / ds.examples[3].video_path));
}

namespace {

DialogExample text_example(const std::string& q, const std::string& a) {
  DialogExample ex;
  ex.question = tokenize(q);
  ex.answer = tokenize(a);
  ex.history = {{tokenize("is it on ?"), tokenize("yes")}, {tokenize("where ?"), tokenize("here")}};
  ex.video = FeatureMatrix{2, 3, {1, 2, 3, 4, 5, 6}};
  ex.audio = FeatureMatrix{1, 2, {7, 8}};
  return ex;
}

}  // namespace

TEST(Batch, AnswerWidthAndMasks) {
  std::vector<DialogExample> exs = {text_example("what ?", "a b c"), text_example("why not ?", "a b c d e")};
  exs[1].video = FeatureMatrix{3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9}};
  Vocab v = Vocab::build_from_text(std::vector<std::string>{"a b c d e what why not ?"});
  const Batch b = make_batch(exs, v, {});
  EXPECT_EQ(b.answer.width, 7u);
  EXPECT_EQ(b.answer.row(0)[0], kSosId);
  EXPECT_EQ(b.answer.row(0)[4], kEosId);
  EXPECT_EQ(b.answer.row(0)[5], kPadId);
  EXPECT_EQ(b.answer.row(1)[6], kEosId);
  std::size_t m0 = 0;
  for (auto m : b.answer.row_mask(0)) m0 += m;
  EXPECT_EQ(m0, 5u);
  std::size_t q1 = 0;
  for (auto m : b.question.row_mask(1)) q1 += m;
  EXPECT_EQ(q1, 3u);
  EXPECT_EQ(b.video.length, 3u);
  EXPECT_EQ(b.video.row_mask(0)[2], 0);
  EXPECT_THROW(make_batch(std::span<const DialogExample>(), v, {}), ContractError);
}

TEST(Batch, SingleExampleHasNoPadding) {
  const std::vector<DialogExample> exs = {text_example("what is it ?", "a b")};
  Vocab v;
  const Batch b = make_batch(exs, v, {});
  for (auto m : b.question.mask) EXPECT_EQ(m, 1);
  for (auto m : b.answer.mask) EXPECT_EQ(m, 1);
  for (auto m : b.history.mask) EXPECT_EQ(m, 1);
  for (auto m : b.video.mask) EXPECT_EQ(m, 1);
}

TEST(Batch, HistoryUsesSeparatorsAndKeepsTail) {
  const auto ex = text_example("q", "a");
  EXPECT_EQ(flatten_history(ex.history),
            (Words{"is", "it", "on", "?", "yes", "<sep>", "where", "?", "here"}));
  MaxLens lens;
  lens.history = 3;
  Vocab v = Vocab::build_from_text(std::vector<std::string>{"where ? here"});
  const Batch b = make_batch(std::span(&ex, 1), v, lens);
  ASSERT_EQ(b.history.width, 3u);
  EXPECT_EQ(v.token(b.history.row(0)[0]), "where");
  EXPECT_EQ(v.token(b.history.row(0)[2]), "here");
}

TEST(Batch, LongAnswersAreTruncated) {
  std::string long_answer;
  for (int i = 0; i < 40; ++i) long_answer += "w ";
  const auto ex = text_example("q", long_answer);
  const Batch b = make_batch(std::span(&ex, 1), Vocab(), {});
  EXPECT_EQ(b.answer.width, 31u);  // sos + 29 tokens + eos
  EXPECT_EQ(b.answer.row(0)[30], kEosId);
}

TEST(Synthetic, DeterministicAndTemplated) {
  SyntheticTaskSpec spec;
  const auto a = generate_synthetic(spec, 50, 9);
  const auto b = generate_synthetic(spec, 50, 9);
  EXPECT_EQ(a.examples, b.examples);
  EXPECT_GT(a.probe.accuracy, 0.95);
  for (std::size_t i = 0; i < a.examples.size(); ++i) {
    const auto& ex = a.examples[i];
    EXPECT_EQ(ex.question.size(), 6u);
    EXPECT_EQ(ex.answer[3], attribute_words()[a.attribute_index[i]]);
    EXPECT_EQ(ex.attribute, ex.answer[3]);
    for (const auto& tok : ex.caption) EXPECT_NE(tok, ex.attribute);
  }
}

TEST(Synthetic, PatternsDependOnlyOnTaskSeed) {
  SyntheticTaskSpec spec;
  spec.noise = 0.0;
  spec.window = spec.video_frames;
  const auto a = generate_synthetic(spec, 40, 1);
  const auto b = generate_synthetic(spec, 40, 2);
  // Noise-free full-window videos are exactly the attribute pattern.
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t j = 0; j < 40; ++j) {
      if (a.attribute_index[i] == b.attribute_index[j]) {
        EXPECT_EQ(a.examples[i].video.values, b.examples[j].video.values);
      }
    }
  }
}

TEST(Synthetic, FullSkewFixesTheAnswerAttribute) {
  SyntheticTaskSpec spec;
  spec.skew = 1.0;
  spec.objects = 1;
  const auto ds = generate_synthetic(spec, 30, 4);
  for (const auto& ex : ds.examples) EXPECT_EQ(ex.answer, ds.examples[0].answer);
}

TEST(Synthetic, UniformAttributeMarginal) {
  SyntheticTaskSpec spec;
  spec.attributes = 8;
  const std::size_t n = 4000;
  const auto ds = generate_synthetic(spec, n, 21);
  std::vector<std::size_t> counts(8, 0);
  for (auto k : ds.attribute_index) ++counts[k];
  const double expect = static_cast<double>(n) / 8.0;
  const double sigma = std::sqrt(static_cast<double>(n) * (1.0 / 8.0) * (7.0 / 8.0));
  for (auto c : counts) EXPECT_LE(std::abs(static_cast<double>(c) - expect), 3.0 * sigma);
}

TEST(Synthetic, RejectsBadSpecs) {
  SyntheticTaskSpec spec;
  spec.attributes = SyntheticTaskSpec::attribute_capacity() + 1;
  EXPECT_THROW(generate_synthetic(spec, 10, 1), ConfigError);
  spec = {};
  EXPECT_THROW(generate_synthetic(spec, 0, 1), ConfigError);
  spec.window = spec.video_frames + 1;
  EXPECT_THROW(generate_synthetic(spec, 10, 1), ConfigError);
}

TEST(Synthetic, UndecodableFeaturesFailLoudly) {
  SyntheticTaskSpec spec;
  spec.noise = 50.0;
  EXPECT_THROW(generate_synthetic(spec, 200, 3), DataError);
}
