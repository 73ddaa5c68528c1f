#include "bgrl/policy.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

#include "bgrl/error.hpp"

namespace bgrl {

namespace {

struct Forward {
  // activations[0] is the input, activations.back() the mean
  std::vector<Eigen::VectorXd> activations;
  std::vector<Eigen::VectorXd> preacts;
};

Forward forward(const PolicyParams& params, const Eigen::VectorXd& state) {
  const auto sizes = params.arch.layer_sizes();
  require_dim(state.size() == sizes.front(),
              "policy: state dimension " + std::to_string(state.size()) +
                  " does not match architecture input " +
                  std::to_string(sizes.front()));
  Forward f;
  f.activations.push_back(state);
  int offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        w(params.theta.data() + offset, out, in);
    Eigen::Map<const Eigen::VectorXd> b(params.theta.data() + offset + in * out,
                                        out);
    offset += in * out + out;
    Eigen::VectorXd z = w * f.activations.back() + b;
    f.preacts.push_back(z);
    const bool last = (l + 2 == sizes.size());
    f.activations.push_back(last ? z : Eigen::VectorXd(z.cwiseMax(0.0)));
  }
  return f;
}

// Accumulates cotangent^T d mean / d theta into grad[0 : num_network_params).
void mean_vjp(const PolicyParams& params, const Forward& f,
              const Eigen::VectorXd& cotangent, Eigen::VectorXd& grad) {
  const auto sizes = params.arch.layer_sizes();
  std::vector<int> offsets;
  int offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    offsets.push_back(offset);
    offset += sizes[l] * sizes[l + 1] + sizes[l + 1];
  }
  Eigen::VectorXd delta = cotangent;
  for (int l = static_cast<int>(sizes.size()) - 2; l >= 0; --l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    if (l + 2 != static_cast<int>(sizes.size())) {
      delta = delta.cwiseProduct(
          f.preacts[l].unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    }
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>
        gw(grad.data() + offsets[l], out, in);
    gw.noalias() += delta * f.activations[l].transpose();
    grad.segment(offsets[l] + in * out, out) += delta;
    if (l > 0) {
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>
          w(params.theta.data() + offsets[l], out, in);
      delta = w.transpose() * delta;
    }
  }
}

void check_params(const PolicyParams& params) {
  require_dim(params.theta.size() == params.arch.num_params(),
              "policy: theta length does not match architecture");
  if (!params.theta.allFinite()) throw Error("policy: non-finite parameters");
}

void put_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t get_uint(std::istream& is, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = is.get();
    if (c == EOF) throw Error("checkpoint: truncated file");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

constexpr char kMagic[8] = {'B', 'G', 'R', 'L', 'C', 'K', 'P', 'T'};

}  // namespace

int Architecture::num_network_params() const {
  const auto sizes = layer_sizes();
  int total = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    total += sizes[l] * sizes[l + 1] + sizes[l + 1];
  }
  return total;
}

std::vector<int> Architecture::layer_sizes() const {
  require(input_dim >= 1 && output_dim >= 1,
          "Architecture: input and output dims must be >= 1");
  std::vector<int> sizes{input_dim};
  for (int h : hidden) {
    require(h >= 1, "Architecture: hidden sizes must be >= 1");
    sizes.push_back(h);
  }
  sizes.push_back(output_dim);
  return sizes;
}

PolicyParams PolicyParams::zeros(const Architecture& arch, double log_std) {
  PolicyParams p{arch, Eigen::VectorXd::Zero(arch.num_params())};
  p.set_log_std(log_std);
  return p;
}

PolicyParams PolicyParams::random(const Architecture& arch, double weight_scale,
                                  double log_std, std::uint64_t seed) {
  PolicyParams p = zeros(arch, log_std);
  Rng rng(seed);
  const auto sizes = arch.layer_sizes();
  int offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    const double scale = weight_scale / std::sqrt(static_cast<double>(in));
    for (int k = 0; k < in * out; ++k) p.theta[offset + k] = scale * rng.normal();
    offset += in * out + out;
  }
  return p;
}

Eigen::VectorXd PolicyParams::log_std() const {
  return theta.tail(arch.output_dim);
}

void PolicyParams::set_log_std(double value) {
  theta.tail(arch.output_dim).setConstant(value);
}

Eigen::VectorXd policy_mean(const PolicyParams& params,
                            const Eigen::VectorXd& state) {
  check_params(params);
  return forward(params, state).activations.back();
}

Eigen::VectorXd sample_action(const PolicyParams& params,
                              const Eigen::VectorXd& state, Rng& rng) {
  const Eigen::VectorXd mean = policy_mean(params, state);
  const Eigen::VectorXd std = params.log_std().array().exp();
  Eigen::VectorXd a(mean.size());
  for (Eigen::Index j = 0; j < mean.size(); ++j) {
    a[j] = mean[j] + std[j] * rng.normal();
  }
  return a;
}

LogProbGrad log_prob_grad(const PolicyParams& params,
                          const Eigen::VectorXd& state,
                          const Eigen::VectorXd& action) {
  check_params(params);
  require_dim(action.size() == params.arch.output_dim,
              "log_prob_grad: action dimension mismatch");
  if (!state.allFinite() || !action.allFinite()) {
    throw Error("log_prob_grad: non-finite state or action");
  }
  const Forward f = forward(params, state);
  const Eigen::VectorXd& mean = f.activations.back();
  const Eigen::ArrayXd ls = params.log_std().array();
  const Eigen::ArrayXd inv_var = (-2.0 * ls).exp();
  const Eigen::ArrayXd diff = action.array() - mean.array();
  const double k = static_cast<double>(action.size());
  LogProbGrad out;
  out.log_prob = -0.5 * k * std::log(2.0 * std::numbers::pi) - ls.sum() -
                 0.5 * (diff.square() * inv_var).sum();
  out.grad = Eigen::VectorXd::Zero(params.theta.size());
  mean_vjp(params, f, (diff * inv_var).matrix(), out.grad);
  out.grad.tail(params.arch.output_dim) =
      (diff.square() * inv_var - 1.0).matrix();
  return out;
}

double log_prob(const PolicyParams& params, const Eigen::VectorXd& state,
                const Eigen::VectorXd& action) {
  const Eigen::VectorXd mean = policy_mean(params, state);
  require_dim(action.size() == mean.size(), "log_prob: action dimension");
  const Eigen::ArrayXd ls = params.log_std().array();
  const Eigen::ArrayXd diff = action.array() - mean.array();
  return -0.5 * static_cast<double>(action.size()) *
             std::log(2.0 * std::numbers::pi) -
         ls.sum() - 0.5 * (diff.square() * (-2.0 * ls).exp()).sum();
}

Eigen::VectorXd reparam_action(const PolicyParams& params,
                               const Eigen::VectorXd& state,
                               const Eigen::VectorXd& eps) {
  require_dim(eps.size() == params.arch.output_dim,
              "reparam_action: eps dimension mismatch");
  return policy_mean(params, state) +
         (params.log_std().array().exp() * eps.array()).matrix();
}

ReparamGrad reparam_action_grad(const PolicyParams& params,
                                const Eigen::VectorXd& state,
                                const Eigen::VectorXd& eps,
                                const Eigen::VectorXd& cotangent) {
  check_params(params);
  require_dim(eps.size() == params.arch.output_dim,
              "reparam_action_grad: eps dimension mismatch");
  require_dim(cotangent.size() == params.arch.output_dim,
              "reparam_action_grad: cotangent dimension mismatch");
  const Forward f = forward(params, state);
  const Eigen::ArrayXd std = params.log_std().array().exp();
  ReparamGrad out;
  out.action = f.activations.back() + (std * eps.array()).matrix();
  out.vjp = Eigen::VectorXd::Zero(params.theta.size());
  mean_vjp(params, f, cotangent, out.vjp);
  out.vjp.tail(params.arch.output_dim) =
      (cotangent.array() * std * eps.array()).matrix();
  return out;
}

Eigen::MatrixXd reparam_jacobian(const PolicyParams& params,
                                 const Eigen::VectorXd& state,
                                 const Eigen::VectorXd& eps) {
  const int k = params.arch.output_dim;
  Eigen::MatrixXd jac(k, params.theta.size());
  for (int j = 0; j < k; ++j) {
    jac.row(j) = reparam_action_grad(params, state, eps,
                                     Eigen::VectorXd::Unit(k, j))
                     .vjp.transpose();
  }
  return jac;
}

PolicyParams perturb(const PolicyParams& params, double sigma,
                     const Eigen::VectorXd& eps) {
  require_dim(eps.size() == params.theta.size(),
              "perturb: eps length must equal theta length");
  PolicyParams out = params;
  out.theta += sigma * eps;
  return out;
}

Eigen::MatrixXd TabularPolicy::probabilities() const {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index s = 0; s < logits.rows(); ++s) {
    const Eigen::ArrayXd row = logits.row(s).transpose().array();
    const Eigen::ArrayXd e = (row - row.maxCoeff()).exp();
    p.row(s) = (e / e.sum()).matrix().transpose();
  }
  return p;
}

void validate_stochastic_rows(const Eigen::MatrixXd& policy) {
  for (Eigen::Index s = 0; s < policy.rows(); ++s) {
    require((policy.row(s).array() >= 0.0).all(),
            "policy row " + std::to_string(s) + " has negative entries");
    require(std::abs(policy.row(s).sum() - 1.0) <= 1e-9,
            "policy row " + std::to_string(s) + " does not sum to 1");
  }
}

void save_checkpoint(const std::filesystem::path& path,
                     const PolicyParams& params) {
  check_params(params);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("checkpoint: cannot open " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put_u32(os, 1);
  const auto sizes = params.arch.layer_sizes();
  put_u32(os, static_cast<std::uint32_t>(sizes.size()));
  for (int s : sizes) put_u32(os, static_cast<std::uint32_t>(s));
  put_u32(os, static_cast<std::uint32_t>(params.arch.output_dim));
  put_u64(os, static_cast<std::uint64_t>(params.theta.size()));
  for (Eigen::Index i = 0; i < params.theta.size(); ++i) {
    put_u64(os, std::bit_cast<std::uint64_t>(params.theta[i]));
  }
  if (!os) throw Error("checkpoint: write failed for " + path.string());
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || !std::equal(magic, magic + 8, kMagic)) {
    throw Error("checkpoint: bad magic in " + path.string());
  }
  if (get_uint(is, 4) != 1) throw Error("checkpoint: unsupported version");
  const auto layers = get_uint(is, 4);
  require(layers >= 2 && layers < 1024, "checkpoint: bad layer count");
  std::vector<int> sizes(layers);
  for (auto& s : sizes) s = static_cast<int>(get_uint(is, 4));
  Architecture arch;
  arch.input_dim = sizes.front();
  arch.output_dim = sizes.back();
  arch.hidden.assign(sizes.begin() + 1, sizes.end() - 1);
  const auto log_std_len = get_uint(is, 4);
  require(static_cast<int>(log_std_len) == arch.output_dim,
          "checkpoint: log_std length disagrees with output size");
  const auto n = get_uint(is, 8);
  require(static_cast<int>(n) == arch.num_params(),
          "checkpoint: theta length disagrees with architecture");
  PolicyParams p{arch, Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  for (std::uint64_t i = 0; i < n; ++i) {
    p.theta[static_cast<Eigen::Index>(i)] =
        std::bit_cast<double>(get_uint(is, 8));
  }
  return p;
}

}  // namespace bgrl
