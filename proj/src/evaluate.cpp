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

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mstn/error.hpp"
#include "mstn/run.hpp"

namespace mstn {

namespace {

DecodeOptions decode_options(const DecodeConfig& d) {
  DecodeOptions o;
  o.beam = d.beam;
  o.max_len = d.max_len;
  o.length_alpha = d.length_alpha;
  o.sos_id = kSosId;
  o.eos_id = kEosId;
  return o;
}

// TSV cells cannot carry tabs or newlines.
std::string tsv_cell(const std::string& s) {
  std::string out = s;
  std::replace(out.begin(), out.end(), '\t', ' ');
  std::replace(out.begin(), out.end(), '\n', ' ');
  return out;
}

double attribute_accuracy(const std::vector<ArmResult>& arms, OutputLayer layer, std::size_t i) {
  std::size_t seen = 0;
  for (const auto& a : arms) {
    if (a.output_layer != layer) continue;
    if (seen++ == i) return a.report.attribute_accuracy.value_or(0.0);
  }
  return 0.0;
}

}  // namespace

EvalReport evaluate_hypotheses(std::span<const Tokens> hypotheses,
                               std::span<const std::vector<Tokens>> references,
                               std::span<const std::string> ids,
                               std::span<const std::string> attributes) {
  const std::size_t n = hypotheses.size();
  if (references.size() != n || (!ids.empty() && ids.size() != n) ||
      (!attributes.empty() && attributes.size() != n)) {
    throw ContractError("evaluation inputs have mismatched lengths");
  }
  EvalReport report;
  report.examples = n;
  const BleuResult corpus = bleu4(hypotheses, references);
  report.bleu4 = corpus.smoothed;
  report.bleu4_raw = corpus.raw;
  report.rouge_l = rouge_l_corpus(hypotheses, references);

  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    EvalRecord rec;
    rec.id = ids.empty() ? std::to_string(i) : ids[i];
    rec.hypothesis = detokenize(hypotheses[i]);
    for (const auto& r : references[i]) rec.references.push_back(detokenize(r));
    rec.bleu4 = bleu4(hypotheses.subspan(i, 1), references.subspan(i, 1)).smoothed;
    rec.rouge_l = rouge_l(hypotheses[i], references[i]);
    if (!attributes.empty() && !attributes[i].empty()) {
      const bool hit = std::find(hypotheses[i].begin(), hypotheses[i].end(), attributes[i]) !=
                       hypotheses[i].end();
      rec.attribute_hit = hit;
      hits += hit ? 1 : 0;
      ++report.attribute_examples;
    }
    report.records.push_back(std::move(rec));
  }
  if (report.attribute_examples > 0) {
    report.attribute_accuracy =
        static_cast<double>(hits) / static_cast<double>(report.attribute_examples);
  }
  return report;
}

std::vector<std::string> generate_answer(const MstnModel& model, const Vocab& vocab,
                                         const DialogExample& example, const DecodeConfig& decode,
                                         const MaxLens& max_lens) {
  if (vocab.size() != model.config().vocab_size) {
    throw DataError("vocabulary has " + std::to_string(vocab.size()) +
                    " tokens but the model expects " + std::to_string(model.config().vocab_size));
  }
  const Batch batch = make_batch(std::span(&example, 1), vocab, max_lens);
  const MstnScorer scorer(model, example_inputs(batch, 0));
  const auto beams = beam_search(scorer, decode_options(decode));
  const auto ids = beams.front().output();
  return vocab.decode(ids);
}

EvalReport evaluate_model(const MstnModel& model, const Vocab& vocab,
                          std::span<const DialogExample> examples, const DecodeConfig& decode,
                          const MaxLens& max_lens) {
  std::vector<Tokens> hyps;
  std::vector<std::vector<Tokens>> refs;
  std::vector<std::string> ids;
  std::vector<std::string> attributes;
  for (const auto& ex : examples) {
    hyps.push_back(generate_answer(model, vocab, ex, decode, max_lens));
    refs.push_back({ex.answer});
    ids.push_back(ex.id);
    attributes.push_back(ex.attribute);
  }
  return evaluate_hypotheses(hyps, refs, ids, attributes);
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["bleu4"] = report.bleu4;
  j["bleu4_raw"] = report.bleu4_raw;
  j["rouge_l"] = report.rouge_l;
  j["attribute_accuracy"] = report.attribute_accuracy
                                ? nlohmann::ordered_json(*report.attribute_accuracy)
                                : nlohmann::ordered_json(nullptr);
  j["examples"] = report.examples;
  j["attribute_examples"] = report.attribute_examples;
  auto records = nlohmann::ordered_json::array();
  for (const auto& r : report.records) {
    nlohmann::ordered_json rec;
    rec["id"] = r.id;
    rec["hypothesis"] = r.hypothesis;
    rec["references"] = r.references;
    rec["bleu4"] = r.bleu4;
    rec["rouge_l"] = r.rouge_l;
    rec["attribute_hit"] =
        r.attribute_hit ? nlohmann::ordered_json(*r.attribute_hit) : nlohmann::ordered_json(nullptr);
    records.push_back(std::move(rec));
  }
  j["records"] = std::move(records);
  return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  try {
    EvalReport report;
    report.bleu4 = j.at("bleu4").get<double>();
    report.bleu4_raw = j.at("bleu4_raw").get<double>();
    report.rouge_l = j.at("rouge_l").get<double>();
    if (!j.at("attribute_accuracy").is_null()) {
      report.attribute_accuracy = j.at("attribute_accuracy").get<double>();
    }
    report.examples = j.at("examples").get<std::size_t>();
    report.attribute_examples = j.at("attribute_examples").get<std::size_t>();
    for (const auto& r : j.at("records")) {
      EvalRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.hypothesis = r.at("hypothesis").get<std::string>();
      rec.references = r.at("references").get<std::vector<std::string>>();
      rec.bleu4 = r.at("bleu4").get<double>();
      rec.rouge_l = r.at("rouge_l").get<double>();
      if (!r.at("attribute_hit").is_null()) rec.attribute_hit = r.at("attribute_hit").get<bool>();
      report.records.push_back(std::move(rec));
    }
    if (report.records.size() != report.examples) {
      throw DataError("report lists " + std::to_string(report.records.size()) +
                      " records but claims " + std::to_string(report.examples));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed evaluation report: ") + e.what());
  }
}

void write_hypotheses_tsv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "id\thypothesis\tgold\n";
  for (const auto& r : report.records) {
    out << tsv_cell(r.id) << '\t' << tsv_cell(r.hypothesis) << '\t'
        << tsv_cell(r.references.empty() ? std::string() : r.references.front()) << '\n';
  }
}

ArmSummary summarize(std::span<const double> values) {
  ArmSummary s;
  if (values.empty()) return s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

AblationReport run_ablation(const RunConfig& base, const Vocab& vocab,
                            std::span<const DialogExample> train,
                            std::span<const DialogExample> valid,
                            std::span<const DialogExample> test,
                            std::span<const std::uint64_t> seeds, std::size_t attribute_classes,
                            const std::function<void(const std::string&)>& progress) {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  if (attribute_classes == 0) throw ConfigError("attribute class count must be >= 1");
  AblationReport report;
  report.chance_accuracy = 1.0 / static_cast<double>(attribute_classes);
  for (const std::uint64_t seed : seeds) {
    RunConfig wean = base;
    wean.seed = seed;
    wean.model.output_layer = OutputLayer::wean;
    RunConfig linear = wean;
    linear.model.output_layer = OutputLayer::linear;
    validate_arms(wean, linear);
    for (const RunConfig* arm : {&wean, &linear}) {
      const std::string name(output_layer_name(arm->model.output_layer));
      if (progress) progress("seed " + std::to_string(seed) + ": training " + name + " arm");
      RunConfig cfg = *arm;
      if (!base.run_dir.empty()) cfg.run_dir = base.run_dir / (name + "_seed" + std::to_string(seed));
      Trainer trainer(cfg, vocab, std::vector(train.begin(), train.end()),
                      std::vector(valid.begin(), valid.end()));
      const TrainLog log = trainer.run();
      ArmResult r;
      r.output_layer = arm->model.output_layer;
      r.seed = seed;
      r.config_hash = config_hash(*arm, true);
      r.full_config_hash = config_hash(*arm, false);
      r.final_train_loss = log.epochs.empty() ? 0.0 : log.epochs.back().train_loss;
      r.best_valid_loss = log.best_valid_loss;
      if (progress) progress("seed " + std::to_string(seed) + ": evaluating " + name + " arm");
      r.report = evaluate_model(trainer.model(), vocab, test, base.decode, base.max_lens);
      report.arms.push_back(std::move(r));
    }
  }
  return report;
}

nlohmann::ordered_json to_json(const AblationReport& report) {
  nlohmann::ordered_json j;
  j["chance_accuracy"] = report.chance_accuracy;
  auto arms = nlohmann::ordered_json::array();
  for (const auto& a : report.arms) {
    nlohmann::ordered_json arm;
    arm["output_layer"] = std::string(output_layer_name(a.output_layer));
    arm["seed"] = a.seed;
    arm["config_hash"] = a.config_hash;
    arm["full_config_hash"] = a.full_config_hash;
    arm["final_train_loss"] = a.final_train_loss;
    arm["best_valid_loss"] = a.best_valid_loss;
    arm["bleu4"] = a.report.bleu4;
    arm["bleu4_raw"] = a.report.bleu4_raw;
    arm["rouge_l"] = a.report.rouge_l;
    arm["attribute_accuracy"] = a.report.attribute_accuracy
                                    ? nlohmann::ordered_json(*a.report.attribute_accuracy)
                                    : nlohmann::ordered_json(nullptr);
    arm["examples"] = a.report.examples;
    arms.push_back(std::move(arm));
  }
  j["arms"] = std::move(arms);

  nlohmann::ordered_json summary;
  std::size_t per_arm = report.arms.size() / 2;
  for (OutputLayer layer : {OutputLayer::wean, OutputLayer::linear}) {
    std::vector<double> acc, bleu, rouge;
    for (const auto& a : report.arms) {
      if (a.output_layer != layer) continue;
      acc.push_back(a.report.attribute_accuracy.value_or(0.0));
      bleu.push_back(a.report.bleu4);
      rouge.push_back(a.report.rouge_l);
    }
    auto pack = [](const ArmSummary& s) {
      return nlohmann::ordered_json{{"mean", s.mean}, {"stddev", s.stddev}, {"min", s.min}, {"max", s.max}};
    };
    summary[std::string(output_layer_name(layer))] = {{"attribute_accuracy", pack(summarize(acc))},
                                                      {"bleu4", pack(summarize(bleu))},
                                                      {"rouge_l", pack(summarize(rouge))}};
  }
  std::vector<double> diffs;
  for (std::size_t i = 0; i < per_arm; ++i) {
    diffs.push_back(attribute_accuracy(report.arms, OutputLayer::wean, i) -
                    attribute_accuracy(report.arms, OutputLayer::linear, i));
  }
  const ArmSummary d = summarize(diffs);
  summary["wean_minus_linear_accuracy"] = {{"mean", d.mean}, {"stddev", d.stddev}, {"min", d.min}, {"max", d.max}};
  summary["wean_at_least_linear"] = d.mean >= 0.0;
  j["summary"] = std::move(summary);
  return j;
}

}  // namespace mstn
