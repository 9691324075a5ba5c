#include "mataformer/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "mataformer/errors.hpp"

namespace mata {

namespace {
constexpr double kNormEps = 1e-6;
constexpr char kCkptMagic[8] = {'M', 'A', 'T', 'A', 'C', 'K', 'P', 'T'};

std::vector<double> xavier_uniform(size_t fan_in, size_t fan_out, Rng& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(fan_in * fan_out);
  for (auto& x : w) x = rng.uniform(-bound, bound);
  return w;
}
}  // namespace

TimeMode time_mode_from_string(const std::string& s) {
  if (s == "mata") return TimeMode::kMata;
  if (s == "sinusoidal") return TimeMode::kSinusoidal;
  if (s == "none") return TimeMode::kNone;
  throw DataError("unknown time_mode '" + s + "' (expected mata | sinusoidal | none)");
}

std::string time_mode_to_string(TimeMode m) {
  switch (m) {
    case TimeMode::kMata: return "mata";
    case TimeMode::kSinusoidal: return "sinusoidal";
    case TimeMode::kNone: return "none";
  }
  return "mata";
}

void ModelConfig::validate() const {
  if (n_heads == 0 || d_model % n_heads != 0)
    throw DataError("model config: d_model must be divisible by n_heads");
  if (n_risks == 0 || horizons.empty()) throw DataError("model config: empty output head");
  if (tau <= 0 || gamma_mu <= 0) throw DataError("model config: tau and gamma_mu must be > 0");
  for (double k : horizons)
    if (k <= 0) throw DataError("model config: horizons must be positive hours");
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model").get<size_t>();
  c.n_layers = j.at("n_layers").get<size_t>();
  c.n_heads = j.at("n_heads").get<size_t>();
  c.d_ff = j.at("d_ff").get<size_t>();
  c.n_risks = j.at("n_risks").get<size_t>();
  c.horizons = j.at("horizons").get<std::vector<double>>();
  c.input_dim = j.at("input_dim").get<size_t>();
  c.tau = j.at("tau").get<double>();
  c.gamma_mu = j.at("gamma_mu").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.alpha_base = j.at("alpha_base").get<double>();
  c.time_mode = time_mode_from_string(j.at("time_mode").get<std::string>());
  c.gated_ffn = j.value("gated_ffn", true);
  c.dynamic_alpha = j.value("dynamic_alpha", true);
  c.dynamic_mu = j.value("dynamic_mu", true);
  c.sin_gamma = j.value("sin_gamma", 64.0);
  c.sin_horizon = j.value("sin_horizon", 1209600.0);
  c.validate();
  return c;
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j;
  j["d_model"] = d_model;
  j["n_layers"] = n_layers;
  j["n_heads"] = n_heads;
  j["d_ff"] = d_ff;
  j["n_risks"] = n_risks;
  j["horizons"] = horizons;
  j["input_dim"] = input_dim;
  j["tau"] = tau;
  j["gamma_mu"] = gamma_mu;
  j["lambda"] = lambda;
  j["alpha_base"] = alpha_base;
  j["time_mode"] = time_mode_to_string(time_mode);
  j["gated_ffn"] = gated_ffn;
  j["dynamic_alpha"] = dynamic_alpha;
  j["dynamic_mu"] = dynamic_mu;
  j["sin_gamma"] = sin_gamma;
  j["sin_horizon"] = sin_horizon;
  return j;
}

ModelConfig ModelConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& ex) {
    throw DataError(path + ": " + ex.what());
  }
  return from_json(j);
}

MataFormer MataFormer::init(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  MataFormer m;
  m.cfg_ = cfg;
  Rng rng(seed ^ 0x517cc1b727220a95ull);

  m.input_proj_ =
      Tensor::param({cfg.input_dim, cfg.d_model}, xavier_uniform(cfg.input_dim, cfg.d_model, rng));

  BiasProjection proj;
  proj.tau = cfg.tau;
  proj.gamma_mu = cfg.gamma_mu;
  proj.lambda = cfg.lambda;

  for (size_t l = 0; l < cfg.n_layers; ++l) {
    TransformerBlock blk;
    blk.attn_norm_gain = Tensor::param({cfg.d_model}, std::vector<double>(cfg.d_model, 1.0));
    blk.attn = MataAttentionLayer::init(cfg.d_model, cfg.n_heads, proj, cfg.alpha_base, rng);
    blk.attn.dynamic_alpha = cfg.dynamic_alpha;
    blk.attn.dynamic_mu = cfg.dynamic_mu;
    blk.ffn_norm_gain = Tensor::param({cfg.d_model}, std::vector<double>(cfg.d_model, 1.0));
    blk.gated = cfg.gated_ffn;
    if (cfg.gated_ffn)
      blk.w_gate = Tensor::param({cfg.d_model, cfg.d_ff}, xavier_uniform(cfg.d_model, cfg.d_ff, rng));
    blk.w_up = Tensor::param({cfg.d_model, cfg.d_ff}, xavier_uniform(cfg.d_model, cfg.d_ff, rng));
    blk.w_down = Tensor::param({cfg.d_ff, cfg.d_model}, xavier_uniform(cfg.d_ff, cfg.d_model, rng));
    m.blocks_.push_back(std::move(blk));
  }

  m.final_norm_gain_ = Tensor::param({cfg.d_model}, std::vector<double>(cfg.d_model, 1.0));
  size_t out_w = cfg.output_width();
  m.head_w_ = Tensor::param({cfg.d_model, out_w}, xavier_uniform(cfg.d_model, out_w, rng));
  m.head_b_ = Tensor::param({out_w}, std::vector<double>(out_w, 0.0));
  return m;
}

Tensor MataFormer::forward(const std::vector<std::vector<double>>& embeddings,
                           const std::vector<int64_t>& t,
                           std::vector<AttnCapture>* capture) const {
  size_t s = embeddings.size();
  if (s == 0) throw DataError("forward: empty sequence");
  if (t.size() != s) throw DataError("forward: timestamps do not align with embeddings");
  for (size_t i = 1; i < s; ++i)
    if (t[i] < t[i - 1]) throw DataError("forward: timestamps must be nondecreasing");

  std::vector<double> flat(s * cfg_.input_dim);
  for (size_t i = 0; i < s; ++i) {
    if (embeddings[i].size() != cfg_.input_dim)
      throw DataError("forward: embedding " + std::to_string(i) + " has dim " +
                      std::to_string(embeddings[i].size()) + ", expected " +
                      std::to_string(cfg_.input_dim));
    std::copy(embeddings[i].begin(), embeddings[i].end(), flat.begin() + i * cfg_.input_dim);
  }
  if (cfg_.time_mode == TimeMode::kSinusoidal) {
    // z = gamma * x + Phi(t), applied in embedding space before projection
    for (size_t i = 0; i < s; ++i) {
      auto phi = sinusoidal_time_encoding(static_cast<double>(t[i]), cfg_.input_dim,
                                          cfg_.sin_horizon);
      for (size_t j = 0; j < cfg_.input_dim; ++j)
        flat[i * cfg_.input_dim + j] = cfg_.sin_gamma * flat[i * cfg_.input_dim + j] + phi[j];
    }
  }

  Tensor x = matmul(Tensor::from_data({s, cfg_.input_dim}, std::move(flat)), input_proj_);

  if (capture) capture->assign(cfg_.n_layers, AttnCapture{});
  for (size_t l = 0; l < blocks_.size(); ++l) {
    const auto& blk = blocks_[l];
    Tensor normed = rmsnorm(x, blk.attn_norm_gain, kNormEps);
    Tensor attn_out =
        blk.attn.forward(normed, t, cfg_.time_mode, capture ? &(*capture)[l] : nullptr);
    x = add(x, attn_out);

    Tensor ffn_in = rmsnorm(x, blk.ffn_norm_gain, kNormEps);
    Tensor ffn_out;
    if (blk.gated)
      ffn_out = matmul(mul(silu(matmul(ffn_in, blk.w_gate)), matmul(ffn_in, blk.w_up)), blk.w_down);
    else
      ffn_out = matmul(silu(matmul(ffn_in, blk.w_up)), blk.w_down);
    x = add(x, ffn_out);
  }

  x = rmsnorm(x, final_norm_gain_, kNormEps);
  return sigmoid(add(matmul(x, head_w_), head_b_));
}

std::vector<NamedParam> MataFormer::parameters() {
  std::vector<NamedParam> out;
  out.push_back({"input_proj.weight", input_proj_, false});
  for (size_t l = 0; l < blocks_.size(); ++l) {
    auto& b = blocks_[l];
    std::string p = "layers." + std::to_string(l) + ".";
    out.push_back({p + "attn_norm.gain", b.attn_norm_gain, false});
    out.push_back({p + "attn.wq", b.attn.wq, false});
    out.push_back({p + "attn.wk", b.attn.wk, false});
    out.push_back({p + "attn.wv", b.attn.wv, false});
    out.push_back({p + "attn.wo", b.attn.wo, false});
    out.push_back({p + "attn.alpha_bar", b.attn.alpha_bar, false});
    out.push_back({p + "attn.mu_logit", b.attn.mu_logit, false});
    out.push_back({p + "attn.fphi.w1", b.attn.fphi_w1, true});
    out.push_back({p + "attn.fphi.b1", b.attn.fphi_b1, true});
    out.push_back({p + "attn.fphi.w2", b.attn.fphi_w2, true});
    out.push_back({p + "attn.fphi.b2", b.attn.fphi_b2, true});
    out.push_back({p + "ffn_norm.gain", b.ffn_norm_gain, false});
    if (b.gated) out.push_back({p + "ffn.w_gate", b.w_gate, false});
    out.push_back({p + "ffn.w_up", b.w_up, false});
    out.push_back({p + "ffn.w_down", b.w_down, false});
  }
  out.push_back({"final_norm.gain", final_norm_gain_, false});
  out.push_back({"head.weight", head_w_, false});
  out.push_back({"head.bias", head_b_, false});
  return out;
}

std::vector<NamedParam> MataFormer::parameters() const {
  return const_cast<MataFormer*>(this)->parameters();
}

size_t MataFormer::count_parameters(bool predictor_group_only) const {
  size_t n = 0;
  for (const auto& p : parameters())
    if (!predictor_group_only || p.predictor_group) n += p.tensor.size();
  return n;
}

size_t MataFormer::expected_parameter_count(const ModelConfig& cfg, bool predictor_group_only) {
  size_t dh = cfg.d_model / cfg.n_heads;
  size_t hidden = MataAttentionLayer::kResidualHidden;
  // residual perceptron per layer: W1 + b1 + W2 + b2, shared across heads
  size_t fphi = cfg.n_layers * (dh * hidden + hidden + hidden * 2 + 2);
  if (predictor_group_only) return fphi;
  size_t ffn = cfg.gated_ffn ? 3 * cfg.d_model * cfg.d_ff : 2 * cfg.d_model * cfg.d_ff;
  size_t per_layer = 4 * cfg.d_model * cfg.d_model  // QKV + output projection
                     + 2 * cfg.d_model              // two norm gains
                     + 2 * cfg.n_heads              // alpha_bar + mu_logit priors
                     + ffn;
  size_t out_w = cfg.output_width();
  return cfg.input_dim * cfg.d_model + cfg.n_layers * per_layer + cfg.d_model +
         out_w * (cfg.d_model + 1) + fphi;
}

void MataFormer::set_dynamic(bool dynamic_alpha, bool dynamic_mu) {
  cfg_.dynamic_alpha = dynamic_alpha;
  cfg_.dynamic_mu = dynamic_mu;
  for (auto& b : blocks_) {
    b.attn.dynamic_alpha = dynamic_alpha;
    b.attn.dynamic_mu = dynamic_mu;
  }
}

// Checkpoint layout: magic "MATACKPT", u32 version, u32 config-json length,
// config json, u64 entry count, then per entry u32 name length, name, u32
// rank, u64 dims, f64 values (all little-endian).
namespace {

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  put_u64(os, u);
}

uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError("checkpoint: truncated " + what);
  return b[0] | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

uint64_t get_u64(std::istream& is, const std::string& what) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw DataError("checkpoint: truncated " + what);
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double get_f64(std::istream& is, const std::string& what) {
  uint64_t u = get_u64(is, what);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace

void MataFormer::save_checkpoint(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kCkptMagic, 8);
  put_u32(out, 1);
  std::string cfg_json = cfg_.to_json().dump();
  put_u32(out, static_cast<uint32_t>(cfg_json.size()));
  out.write(cfg_json.data(), static_cast<std::streamsize>(cfg_json.size()));
  auto params = parameters();
  put_u64(out, params.size());
  for (const auto& p : params) {
    put_u32(out, static_cast<uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(out, static_cast<uint32_t>(p.tensor.shape().size()));
    for (size_t d : p.tensor.shape()) put_u64(out, d);
    for (double v : p.tensor.data()) put_f64(out, v);
  }
}

MataFormer MataFormer::load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw DataError(path + ": bad magic, not a MATACKPT file");
  uint32_t version = get_u32(in, "version");
  if (version != 1) throw DataError(path + ": unsupported checkpoint version");
  uint32_t cfg_len = get_u32(in, "config length");
  std::string cfg_json(cfg_len, '\0');
  if (!in.read(cfg_json.data(), cfg_len)) throw DataError(path + ": truncated config");
  ModelConfig cfg = ModelConfig::from_json(nlohmann::json::parse(cfg_json));

  MataFormer m = MataFormer::init(cfg, 0);
  auto params = m.parameters();
  uint64_t count = get_u64(in, "entry count");
  if (count != params.size())
    throw DataError(path + ": checkpoint has " + std::to_string(count) + " entries, model needs " +
                    std::to_string(params.size()));
  for (auto& p : params) {
    uint32_t name_len = get_u32(in, "name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw DataError(path + ": truncated name");
    if (name != p.name)
      throw DataError(path + ": expected entry '" + p.name + "', found '" + name + "'");
    uint32_t rank = get_u32(in, "rank");
    std::vector<size_t> shape(rank);
    for (auto& d : shape) d = get_u64(in, "dimension");
    if (shape != p.tensor.shape()) throw DataError(path + ": shape mismatch for '" + name + "'");
    auto& data = p.tensor.data_mut();
    for (auto& v : data) v = get_f64(in, "value of " + name);
  }
  return m;
}

}  // namespace mata
