#include "emu/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "emu/errors.hpp"
#include "emu/rng.hpp"
#include "json.hpp"

namespace emu {

namespace {

using json = nlohmann::json;

constexpr char kMagic[4] = {'P', 'D', 'L', 'K'};
constexpr const char* kToolVersion = "1.0.0";

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t le(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const noexcept { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) throw CorruptCheckpoint("checkpoint is truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_inf(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

json manifest_of(const Ensemble& ens) {
  const ArchSpec& a = ens.members.front().spec();
  const TrainConfig& t = ens.train_config;
  const Preprocessor& p = ens.preprocessor;

  json members = json::array();
  for (std::size_t i = 0; i < ens.members.size(); ++i) {
    members.push_back({{"index", i}, {"seed", ens.members[i].seed()}});
  }
  json log = json::array();
  for (const auto& member_log : ens.training_log) {
    json epochs = json::array();
    for (const auto& e : member_log) {
      epochs.push_back({{"epoch", e.epoch},
                        {"train_loss", finite_or_null(e.train_loss)},
                        {"val_loss", finite_or_null(e.val_loss)}});
    }
    log.push_back(std::move(epochs));
  }
  return {
      {"format", "PDLK"},
      {"format_version", kCheckpointVersion},
      {"architecture",
       {{"d_in", a.d_in},
        {"d_out", a.d_out},
        {"n_hidden", a.n_hidden},
        {"width", a.width},
        {"sigma_min", a.sigma_min}}},
      {"preprocessor",
       {{"log_outputs", p.log_outputs},
        {"log_base", 10},
        {"x_mean", p.x_mean},
        {"x_std", p.x_std},
        {"y_mean", p.y_mean},
        {"y_std", p.y_std}}},
      {"train_config",
       {{"n_members", t.n_members},
        {"batch_size", t.batch_size},
        {"learning_rate", t.learning_rate},
        {"max_epochs", t.max_epochs},
        {"early_stop_patience", t.early_stop_patience},
        {"base_seed", t.base_seed},
        {"use_adversarial", t.use_adversarial},
        {"objective", std::string(to_string(t.objective))},
        {"log_outputs", t.log_outputs},
        {"loss",
         {{"beta", t.loss.beta},
          {"alpha", t.loss.alpha},
          {"epsilon", t.loss.epsilon},
          {"reg_kind", std::string(to_string(t.loss.reg_kind))},
          {"include_constant", t.loss.include_constant}}}}},
      {"mode", std::string(to_string(ens.mode))},
      {"members", members},
      {"rng_algorithm", std::string(kRngAlgorithm)},
      {"tensor_order", "hidden[1..N].weight, hidden[1..N].bias interleaved per layer; "
                       "mu_head.weight, mu_head.bias; sigma_head.weight, sigma_head.bias"},
      {"training_log", log},
      {"created_by", {{"tool", "emu"}, {"version", kToolVersion}}},
  };
}

Ensemble ensemble_from_manifest(const json& m, std::size_t& member_count) {
  Ensemble ens;
  const json& a = m.at("architecture");
  ArchSpec spec;
  spec.d_in = a.at("d_in").get<std::size_t>();
  spec.d_out = a.at("d_out").get<std::size_t>();
  spec.n_hidden = a.at("n_hidden").get<std::size_t>();
  spec.width = a.at("width").get<std::size_t>();
  spec.sigma_min = a.at("sigma_min").get<double>();
  spec.validate();

  const json& p = m.at("preprocessor");
  ens.preprocessor.log_outputs = p.at("log_outputs").get<bool>();
  ens.preprocessor.x_mean = p.at("x_mean").get<std::vector<double>>();
  ens.preprocessor.x_std = p.at("x_std").get<std::vector<double>>();
  ens.preprocessor.y_mean = p.at("y_mean").get<std::vector<double>>();
  ens.preprocessor.y_std = p.at("y_std").get<std::vector<double>>();

  const json& t = m.at("train_config");
  TrainConfig& c = ens.train_config;
  c.arch = spec;
  c.n_members = t.at("n_members").get<std::size_t>();
  c.batch_size = t.at("batch_size").get<std::size_t>();
  c.learning_rate = t.at("learning_rate").get<double>();
  c.max_epochs = t.at("max_epochs").get<std::size_t>();
  c.early_stop_patience = t.at("early_stop_patience").get<std::size_t>();
  c.base_seed = t.at("base_seed").get<std::uint64_t>();
  c.use_adversarial = t.at("use_adversarial").get<bool>();
  c.objective = parse_objective(t.at("objective").get<std::string>());
  c.log_outputs = t.at("log_outputs").get<bool>();
  const json& l = t.at("loss");
  c.loss.beta = l.at("beta").get<double>();
  c.loss.alpha = l.at("alpha").get<double>();
  c.loss.epsilon = l.at("epsilon").get<double>();
  c.loss.reg_kind = parse_reg_kind(l.at("reg_kind").get<std::string>());
  c.loss.include_constant = l.at("include_constant").get<bool>();

  ens.mode = parse_aggregation_mode(m.at("mode").get<std::string>());

  const json& members = m.at("members");
  member_count = members.size();
  for (const auto& member_log : m.at("training_log")) {
    std::vector<EpochRecord> epochs;
    for (const auto& e : member_log) {
      epochs.push_back({e.at("epoch").get<std::size_t>(), number_or_inf(e.at("train_loss")),
                        number_or_inf(e.at("val_loss"))});
    }
    ens.training_log.push_back(std::move(epochs));
  }
  // Parameters are filled in from the blobs that follow the manifest.
  for (const auto& member : members) {
    ens.members.emplace_back(spec, NetParams::zeros(spec), member.at("seed").get<std::uint64_t>());
  }
  return ens;
}

}  // namespace

std::string encode_checkpoint(const Ensemble& ens) {
  ens.validate();
  const std::string manifest = manifest_of(ens).dump(2);
  std::string out(kMagic, 4);
  put_le(out, kCheckpointVersion, 4);
  put_le(out, manifest.size(), 8);
  out += manifest;
  for (const ProbNet& net : ens.members) {
    for (const Matrix* t : net.params().tensors()) {
      put_le(out, t->rows(), 8);
      put_le(out, t->cols(), 8);
      for (double v : t->data()) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
    }
  }
  return out;
}

Ensemble decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw UnsupportedFormat("not a PDLK checkpoint (bad magic)");
  }
  Reader r(bytes);
  (void)r.take(4);
  const auto version = static_cast<std::uint32_t>(r.le(4));
  if (version != kCheckpointVersion) {
    throw UnsupportedFormat("unsupported PDLK version " + std::to_string(version));
  }
  const std::uint64_t manifest_len = r.le(8);
  if (manifest_len > bytes.size()) throw CorruptCheckpoint("checkpoint is truncated");
  const std::string manifest_text = r.take(manifest_len);

  Ensemble ens;
  std::size_t member_count = 0;
  try {
    const json manifest = json::parse(manifest_text);
    if (manifest.at("format").get<std::string>() != "PDLK" ||
        manifest.at("format_version").get<std::uint32_t>() != kCheckpointVersion) {
      throw UnsupportedFormat("manifest declares an unsupported format");
    }
    ens = ensemble_from_manifest(manifest, member_count);
  } catch (const json::exception& e) {
    throw CorruptCheckpoint(std::string("malformed checkpoint manifest: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw CorruptCheckpoint(std::string("invalid checkpoint manifest: ") + e.what());
  }

  for (std::size_t m = 0; m < member_count; ++m) {
    NetParams params = NetParams::zeros(ens.members[m].spec());
    for (Matrix* t : params.tensors()) {
      const std::uint64_t rows = r.le(8);
      const std::uint64_t cols = r.le(8);
      if (rows != t->rows() || cols != t->cols()) {
        throw CorruptCheckpoint("member " + std::to_string(m) + ": tensor shape " +
                                std::to_string(rows) + "x" + std::to_string(cols) +
                                " does not match the architecture");
      }
      for (auto& v : t->data()) v = std::bit_cast<double>(r.le(8));
    }
    ens.members[m] = ProbNet(ens.members[m].spec(), std::move(params), ens.members[m].seed());
  }
  if (!r.at_end()) throw CorruptCheckpoint("checkpoint has trailing bytes");
  try {
    ens.validate();
  } catch (const Error& e) {
    throw CorruptCheckpoint(std::string("inconsistent checkpoint: ") + e.what());
  }
  return ens;
}

void save_checkpoint(const Ensemble& ens, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ens);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Ensemble load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read from '" + path.string() + "' failed");
  return decode_checkpoint(bytes);
}

}  // namespace emu
