#include "cli/run_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "emu/errors.hpp"

namespace emu::cli {

namespace {

using nlohmann::json;

// One JSON object whose keys are consumed by typed getters; whatever is left
// over at the end is reported as unknown.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (!doc.is_object()) throw InvalidArgument(where() + "must be an object");
    obj_ = &doc;
  }

  void number(const char* key, double& out) {
    const json* v = take(key);
    if (v == nullptr) return;
    if (!v->is_number()) throw InvalidArgument(where(key) + "must be a number");
    out = v->get<double>();
    if (!std::isfinite(out)) throw InvalidArgument(where(key) + "must be finite");
  }

  template <class Int>
  void count(const char* key, Int& out) {
    const json* v = take(key);
    if (v == nullptr) return;
    if (!v->is_number_unsigned()) throw InvalidArgument(where(key) + "must be a non-negative integer");
    out = static_cast<Int>(v->get<std::uint64_t>());
  }

  void flag(const char* key, bool& out) {
    const json* v = take(key);
    if (v == nullptr) return;
    if (!v->is_boolean()) throw InvalidArgument(where(key) + "must be true or false");
    out = v->get<bool>();
  }

  template <class Parse, class T>
  void name(const char* key, T& out, Parse parse) {
    const json* v = take(key);
    if (v == nullptr) return;
    if (!v->is_string()) throw InvalidArgument(where(key) + "must be a string");
    try {
      out = parse(v->get<std::string>());
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(where(key) + e.what());
    }
  }

  void numbers(const char* key, std::vector<double>& out) {
    const json* v = take(key);
    if (v == nullptr) return;
    if (!v->is_array()) throw InvalidArgument(where(key) + "must be an array of numbers");
    out.clear();
    for (const auto& e : *v) {
      if (!e.is_number()) throw InvalidArgument(where(key) + "must be an array of numbers");
      out.push_back(e.get<double>());
    }
  }

  void counts(const char* key, std::vector<std::size_t>& out) {
    const json* v = take(key);
    if (v == nullptr) return;
    if (!v->is_array()) throw InvalidArgument(where(key) + "must be an array of integers");
    out.clear();
    for (const auto& e : *v) {
      if (!e.is_number_unsigned()) throw InvalidArgument(where(key) + "must be an array of integers");
      out.push_back(e.get<std::size_t>());
    }
  }

  const json* take(const char* key) {
    seen_.insert(key);
    const auto it = obj_->find(key);
    return it == obj_->end() || it->is_null() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : obj_->items()) {
      if (!seen_.contains(key)) throw InvalidArgument("unknown key '" + qualified(key) + "'");
    }
  }

 private:
  std::string qualified(const std::string& key) const {
    return name_.empty() ? key : name_ + "." + key;
  }
  std::string where(const std::string& key = {}) const {
    if (key.empty()) return (name_.empty() ? std::string("config") : name_) + ": ";
    return qualified(key) + ": ";
  }

  const json* obj_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidArgument(message);
}

}  // namespace

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.train.arch.d_in = cfg.simulator.d_in;
  cfg.train.arch.d_out = cfg.simulator.d_out;
  cfg.train.arch.n_hidden = 3;
  cfg.train.arch.width = 128;
  cfg.train.batch_size = 64;
  cfg.train.learning_rate = 1e-3;
  cfg.evaluate.simulator = cfg.simulator;
  return cfg;
}

RunConfig parse_run_config(const json& doc) {
  RunConfig cfg = default_run_config();
  Section root(doc, "");

  if (const json* s = root.take("simulator")) {
    Section sec(*s, "simulator");
    sec.count("d_out", cfg.simulator.d_out);
    sec.number("packet_count", cfg.simulator.packet_count);
    sec.number("noise_coeff", cfg.simulator.noise_coeff);
    sec.count("seed", cfg.simulator.seed);
    sec.finish();
  }
  if (const json* s = root.take("dataset")) {
    Section sec(*s, "dataset");
    sec.count("n", cfg.n_samples);
    sec.number("train_fraction", cfg.fractions.train);
    sec.number("validation_fraction", cfg.fractions.validation);
    sec.number("test_fraction", cfg.fractions.test);
    sec.finish();
  }
  if (const json* s = root.take("model")) {
    Section sec(*s, "model");
    sec.count("hidden_layers", cfg.train.arch.n_hidden);
    sec.count("width", cfg.train.arch.width);
    sec.number("sigma_min", cfg.train.arch.sigma_min);
    sec.finish();
  }
  if (const json* s = root.take("loss")) {
    Section sec(*s, "loss");
    sec.number("beta", cfg.train.loss.beta);
    sec.number("alpha", cfg.train.loss.alpha);
    sec.number("epsilon", cfg.train.loss.epsilon);
    sec.name("reg_kind", cfg.train.loss.reg_kind, [](const std::string& v) { return parse_reg_kind(v); });
    sec.flag("include_constant", cfg.train.loss.include_constant);
    sec.finish();
  }
  if (const json* s = root.take("train")) {
    Section sec(*s, "train");
    sec.count("members", cfg.train.n_members);
    sec.count("batch_size", cfg.train.batch_size);
    sec.number("learning_rate", cfg.train.learning_rate);
    sec.count("max_epochs", cfg.train.max_epochs);
    sec.count("patience", cfg.train.early_stop_patience);
    sec.count("seed", cfg.train.base_seed);
    sec.flag("adversarial", cfg.train.use_adversarial);
    sec.name("objective", cfg.train.objective, [](const std::string& v) { return parse_objective(v); });
    sec.flag("log_outputs", cfg.train.log_outputs);
    sec.finish();
  }
  if (const json* s = root.take("evaluate")) {
    Section sec(*s, "evaluate");
    sec.numbers("coverage_levels", cfg.evaluate.coverage_levels);
    sec.count("reruns", cfg.evaluate.n_reruns);
    sec.number("z", cfg.evaluate.envelopment_z);
    sec.count("rerun_seed", cfg.evaluate.rerun_seed);
    sec.counts("timing_batch_sizes", cfg.evaluate.timing_batch_sizes);
    sec.count("timing_repetitions", cfg.evaluate.timing_repetitions);
    sec.count("timing_warmups", cfg.evaluate.timing_warmups);
    sec.number("series_level", cfg.evaluate.series_level);
    if (sec.take("mode") != nullptr) {
      AggregationMode mode{};
      sec.name("mode", mode, [](const std::string& v) { return parse_aggregation_mode(v); });
      cfg.evaluate.mode = mode;
    }
    sec.finish();
  }
  root.finish();

  cfg.train.arch.d_in = cfg.simulator.d_in;
  cfg.train.arch.d_out = cfg.simulator.d_out;
  cfg.evaluate.simulator = cfg.simulator;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(doc);
}

void RunConfig::validate() const {
  simulator.validate();
  fractions.validate();
  train.validate();
  require(n_samples >= 3, "dataset.n must be at least 3");
  require(train.early_stop_patience >= 1, "train.patience must be >= 1");
  for (double level : evaluate.coverage_levels) {
    require(level > 0.0 && level < 1.0, "evaluate.coverage_levels: each level must lie in (0, 1)");
  }
  require(evaluate.n_reruns >= 2, "evaluate.reruns must be >= 2");
  require(evaluate.envelopment_z > 0.0, "evaluate.z must be > 0");
  for (std::size_t b : evaluate.timing_batch_sizes) {
    require(b >= 1, "evaluate.timing_batch_sizes: sizes must be >= 1");
  }
  require(evaluate.timing_repetitions >= 1, "evaluate.timing_repetitions must be >= 1");
  require(evaluate.series_level > 0.0 && evaluate.series_level < 1.0,
          "evaluate.series_level must lie in (0, 1)");
}

nlohmann::json to_json(const RunConfig& cfg) {
  json doc;
  doc["simulator"] = {{"d_out", cfg.simulator.d_out},
                      {"packet_count", cfg.simulator.packet_count},
                      {"noise_coeff", cfg.simulator.noise_coeff},
                      {"seed", cfg.simulator.seed}};
  doc["dataset"] = {{"n", cfg.n_samples},
                    {"train_fraction", cfg.fractions.train},
                    {"validation_fraction", cfg.fractions.validation},
                    {"test_fraction", cfg.fractions.test}};
  doc["model"] = {{"hidden_layers", cfg.train.arch.n_hidden},
                  {"width", cfg.train.arch.width},
                  {"sigma_min", cfg.train.arch.sigma_min}};
  doc["loss"] = {{"beta", cfg.train.loss.beta},
                 {"alpha", cfg.train.loss.alpha},
                 {"epsilon", cfg.train.loss.epsilon},
                 {"reg_kind", std::string(to_string(cfg.train.loss.reg_kind))},
                 {"include_constant", cfg.train.loss.include_constant}};
  doc["train"] = {{"members", cfg.train.n_members},
                  {"batch_size", cfg.train.batch_size},
                  {"learning_rate", cfg.train.learning_rate},
                  {"max_epochs", cfg.train.max_epochs},
                  {"patience", cfg.train.early_stop_patience},
                  {"seed", cfg.train.base_seed},
                  {"adversarial", cfg.train.use_adversarial},
                  {"objective", std::string(to_string(cfg.train.objective))},
                  {"log_outputs", cfg.train.log_outputs}};
  json ev = {{"coverage_levels", cfg.evaluate.coverage_levels},
             {"reruns", cfg.evaluate.n_reruns},
             {"z", cfg.evaluate.envelopment_z},
             {"rerun_seed", cfg.evaluate.rerun_seed},
             {"timing_batch_sizes", cfg.evaluate.timing_batch_sizes},
             {"timing_repetitions", cfg.evaluate.timing_repetitions},
             {"timing_warmups", cfg.evaluate.timing_warmups},
             {"series_level", cfg.evaluate.series_level}};
  if (cfg.evaluate.mode) ev["mode"] = std::string(to_string(*cfg.evaluate.mode));
  doc["evaluate"] = ev;
  return doc;
}

}  // namespace emu::cli
