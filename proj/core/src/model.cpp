#include "emu/model.hpp"

#include <cmath>
#include <string>

#include "emu/activation.hpp"
#include "emu/errors.hpp"
#include "emu/init.hpp"
#include "emu/rng.hpp"

namespace emu {

void ArchSpec::validate() const {
  if (d_in == 0 || d_out == 0 || n_hidden == 0 || width == 0) {
    throw InvalidArgument("ArchSpec: d_in, d_out, n_hidden and width must all be >= 1");
  }
  if (!(sigma_min > 0.0) || !std::isfinite(sigma_min)) {
    throw InvalidArgument("ArchSpec: sigma_min must be finite and > 0");
  }
}

std::vector<std::size_t> ArchSpec::hidden_input_widths() const {
  std::vector<std::size_t> widths(n_hidden);
  for (std::size_t k = 0; k < n_hidden; ++k) {
    if (k == 0) {
      widths[k] = d_in;
    } else if (k == 1) {
      widths[k] = width + d_in;
    } else {
      widths[k] = 2 * width;
    }
  }
  return widths;
}

std::size_t ArchSpec::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t in : hidden_input_widths()) count += in * width + width;
  count += 2 * (width * d_out + d_out);
  return count;
}

NetParams NetParams::zeros(const ArchSpec& spec) {
  spec.validate();
  NetParams p;
  for (std::size_t in : spec.hidden_input_widths()) {
    p.hidden.push_back({Matrix(in, spec.width), Matrix(1, spec.width)});
  }
  p.mu_head = {Matrix(spec.width, spec.d_out), Matrix(1, spec.d_out)};
  p.sigma_head = {Matrix(spec.width, spec.d_out), Matrix(1, spec.d_out)};
  return p;
}

std::vector<Matrix*> NetParams::tensors() {
  std::vector<Matrix*> t;
  t.reserve(2 * hidden.size() + 4);
  for (auto& layer : hidden) {
    t.push_back(&layer.weight);
    t.push_back(&layer.bias);
  }
  t.push_back(&mu_head.weight);
  t.push_back(&mu_head.bias);
  t.push_back(&sigma_head.weight);
  t.push_back(&sigma_head.bias);
  return t;
}

std::vector<const Matrix*> NetParams::tensors() const {
  std::vector<const Matrix*> t;
  for (Matrix* m : const_cast<NetParams*>(this)->tensors()) t.push_back(m);
  return t;
}

ProbNet::ProbNet(const ArchSpec& spec, std::uint64_t seed)
    : spec_(spec), params_(NetParams::zeros(spec)), seed_(seed) {
  Rng rng(derive_seed(seed, stream::kInit, 0));
  for (auto& layer : params_.hidden) {
    layer.weight = xavier_normal_init(layer.weight.rows(), layer.weight.cols(), rng);
  }
  params_.mu_head.weight = xavier_normal_init(spec.width, spec.d_out, rng);
  params_.sigma_head.weight = xavier_normal_init(spec.width, spec.d_out, rng);
}

ProbNet::ProbNet(const ArchSpec& spec, NetParams params, std::uint64_t seed)
    : spec_(spec), params_(std::move(params)), seed_(seed) {
  const NetParams expected = NetParams::zeros(spec);
  const auto want = expected.tensors();
  const auto have = params_.tensors();
  if (want.size() != have.size()) {
    throw InvalidArgument("ProbNet: expected " + std::to_string(want.size()) +
                          " parameter tensors, got " + std::to_string(have.size()));
  }
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i]->rows() != have[i]->rows() || want[i]->cols() != have[i]->cols()) {
      throw InvalidArgument("ProbNet: parameter tensor " + std::to_string(i) + " has shape " +
                            std::to_string(have[i]->rows()) + "x" + std::to_string(have[i]->cols()) +
                            ", expected " + std::to_string(want[i]->rows()) + "x" +
                            std::to_string(want[i]->cols()));
    }
  }
}

ProbNet ProbNet::zeros(const ArchSpec& spec) { return ProbNet(spec, NetParams::zeros(spec), 0); }

namespace {

Matrix affine(const Matrix& x, const Dense& layer) {
  Matrix z = matmul(x, layer.weight);
  add_row_vector_inplace(z, layer.bias);
  return z;
}

void require_finite(const Matrix& m, const std::string& where) {
  if (!m.all_finite()) throw NumericError("non-finite activation in " + where);
}

// Adds columns [first, first + dst.cols()) of src into dst.
void accumulate_slice(Matrix& dst, const Matrix& src, std::size_t first) {
  for (std::size_t i = 0; i < src.rows(); ++i) {
    auto d = dst.row(i);
    const auto s = src.row(i).subspan(first, d.size());
    for (std::size_t j = 0; j < d.size(); ++j) d[j] += s[j];
  }
}

}  // namespace

ForwardResult forward(const ProbNet& net, const Matrix& x) {
  const ArchSpec& spec = net.spec();
  if (x.cols() != spec.d_in) {
    throw InvalidArgument("forward: input has " + std::to_string(x.cols()) + " columns, expected " +
                          std::to_string(spec.d_in));
  }
  const NetParams& p = net.params();
  ForwardResult r;
  ForwardCache& c = r.cache;
  c.owner = &net;
  c.revision = net.revision();
  c.inputs.reserve(spec.n_hidden);
  c.pre.reserve(spec.n_hidden);
  c.out.reserve(spec.n_hidden);
  c.slope.reserve(spec.n_hidden);

  for (std::size_t k = 0; k < spec.n_hidden; ++k) {
    if (k == 0) {
      c.inputs.push_back(x);
    } else if (k == 1) {
      c.inputs.push_back(concat_columns(c.out[0], x));
    } else {
      c.inputs.push_back(concat_columns(c.out[k - 1], c.out[k - 2]));
    }
    c.pre.push_back(affine(c.inputs[k], p.hidden[k]));
    c.out.emplace_back();
    c.slope.emplace_back();
    softplus_with_grad(c.pre[k], c.out[k], c.slope[k]);
    require_finite(c.out[k], "hidden layer " + std::to_string(k + 1));
  }

  const Matrix& top = c.out.back();
  r.mu = affine(top, p.mu_head);
  require_finite(r.mu, "mu head");

  c.sigma_pre = affine(top, p.sigma_head);
  const double floor_sd = std::sqrt(spec.sigma_min);
  softplus_with_grad(c.sigma_pre, c.sigma, c.sigma_slope);
  for (auto& v : c.sigma.data()) v += floor_sd;
  r.sigma2 = hadamard(c.sigma, c.sigma);
  require_finite(r.sigma2, "sigma head");
  return r;
}

BackwardResult backward(const ProbNet& net, const ForwardCache& cache, const Matrix& d_mu,
                        const Matrix& d_sigma2) {
  const ArchSpec& spec = net.spec();
  if (cache.owner != &net || cache.revision != net.revision()) {
    throw InvalidState("backward: forward cache is stale or belongs to another network");
  }
  if (cache.out.size() != spec.n_hidden || cache.slope.size() != spec.n_hidden) {
    throw InvalidState("backward: forward cache is incomplete");
  }
  const std::size_t n = cache.inputs.front().rows();
  if (d_mu.rows() != n || d_mu.cols() != spec.d_out || d_sigma2.rows() != n ||
      d_sigma2.cols() != spec.d_out) {
    throw InvalidArgument("backward: output gradients must be " + std::to_string(n) + "x" +
                          std::to_string(spec.d_out));
  }

  const NetParams& p = net.params();
  BackwardResult r;
  NetParams& g = r.param_grads;
  g.hidden.resize(spec.n_hidden);

  const Matrix& top = cache.out.back();

  g.mu_head.weight = matmul_tn(top, d_mu);
  g.mu_head.bias = column_sums(d_mu);

  // sigma2 = s^2, s = softplus(z) + floor
  Matrix dz_sigma(n, spec.d_out);
  {
    const auto ds2 = d_sigma2.data();
    const auto s = cache.sigma.data();
    const auto slope = cache.sigma_slope.data();
    auto out = dz_sigma.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ds2[i] * 2.0 * s[i] * slope[i];
  }
  g.sigma_head.weight = matmul_tn(top, dz_sigma);
  g.sigma_head.bias = column_sums(dz_sigma);

  // dh[0] is the gradient w.r.t. x, dh[k] w.r.t. the output of hidden layer k.
  std::vector<Matrix> dh(spec.n_hidden + 1);
  dh[0] = Matrix(n, spec.d_in);
  for (std::size_t k = 1; k < spec.n_hidden; ++k) dh[k] = Matrix(n, spec.width);
  dh[spec.n_hidden] = matmul_nt(d_mu, p.mu_head.weight);
  add_inplace(dh[spec.n_hidden], matmul_nt(dz_sigma, p.sigma_head.weight));

  for (std::size_t layer = spec.n_hidden; layer >= 1; --layer) {
    const std::size_t k = layer - 1;
    Matrix dz = cache.slope[k];
    {
      auto d = dz.data();
      const auto up = dh[layer].data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= up[i];
    }
    g.hidden[k].weight = matmul_tn(cache.inputs[k], dz);
    g.hidden[k].bias = column_sums(dz);
    const Matrix d_in = matmul_nt(dz, p.hidden[k].weight);
    if (layer == 1) {
      add_inplace(dh[0], d_in);
    } else {
      accumulate_slice(dh[layer - 1], d_in, 0);
      accumulate_slice(dh[layer - 2], d_in, spec.width);
    }
  }
  r.input_grads = std::move(dh[0]);
  return r;
}

ParamNorms param_vector_norms(const NetParams& params) {
  double sq = 0.0;
  for (const Matrix* t : params.tensors()) sq += sum_of_squares(*t);
  return {sq, std::sqrt(sq)};
}

ParamNorms param_vector_norms(const ProbNet& net) { return param_vector_norms(net.params()); }

}  // namespace emu
