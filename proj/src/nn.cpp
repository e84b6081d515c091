#include "gyrocal/nn.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "gyrocal/format.hpp"
#include "gyrocal/rng.hpp"

namespace gyrocal::nn {

// --- config / params -------------------------------------------------------------

std::size_t NetworkConfig::conv_len() const {
  if (stride == 0 || kernel == 0 || window_len < kernel) return 0;
  return (window_len - kernel) / stride + 1;
}

std::size_t NetworkConfig::pooled_len() const { return pool == 0 ? 0 : conv_len() / pool; }

void NetworkConfig::validate() const {
  if (in_channels == 0 || filters == 0 || hidden == 0) {
    throw std::invalid_argument("network: channels, filters and hidden width must be >= 1");
  }
  if (kernel == 0 || stride == 0 || pool == 0) {
    throw std::invalid_argument("network: kernel, stride and pool must be >= 1");
  }
  if (conv_len() < 1) {
    throw std::invalid_argument("network: window of " + std::to_string(window_len) +
                                " samples is shorter than the kernel (" + std::to_string(kernel) + ")");
  }
  if (pooled_len() < 1) {
    throw std::invalid_argument("network: conv output length " + std::to_string(conv_len()) +
                                " is shorter than the pool size " + std::to_string(pool));
  }
  if (!(leaky_slope > 0.0) || !std::isfinite(leaky_slope)) {
    throw std::invalid_argument("network: leaky slope must be > 0");
  }
}

std::array<std::vector<double>*, 6> NetworkParams::tensors() {
  return {&conv_w, &conv_b, &w1, &b1, &w2, &b2};
}

std::array<const std::vector<double>*, 6> NetworkParams::tensors() const {
  return {&conv_w, &conv_b, &w1, &b1, &w2, &b2};
}

std::size_t NetworkParams::count() const {
  std::size_t n = 0;
  for (const auto* t : tensors()) n += t->size();
  return n;
}

NetworkParams NetworkParams::zeros(const NetworkConfig& c) {
  c.validate();
  NetworkParams p;
  p.conv_w.assign(c.filters * c.in_channels * c.kernel, 0.0);
  p.conv_b.assign(c.conv_bias ? c.filters : 0, 0.0);
  p.w1.assign(c.flat_len() * c.hidden, 0.0);
  p.b1.assign(c.hidden, 0.0);
  p.w2.assign(c.hidden * c.out_dim(), 0.0);
  p.b2.assign(c.out_dim(), 0.0);
  return p;
}

NetworkParams initial_params(const NetworkConfig& config, std::uint64_t seed) {
  NetworkParams p = NetworkParams::zeros(config);
  const std::array<double, 6> fan_in{
      static_cast<double>(config.in_channels * config.kernel), static_cast<double>(config.in_channels * config.kernel),
      static_cast<double>(config.flat_len()),                  static_cast<double>(config.flat_len()),
      static_cast<double>(config.hidden),                      static_cast<double>(config.hidden)};
  auto ts = p.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    RandomStream rng(derive_seed({seed, kInitStream, i}));
    const double bound = 1.0 / std::sqrt(fan_in[i]);
    for (double& v : *ts[i]) v = bound * (2.0 * rng.uniform01() - 1.0);
  }
  return p;
}

namespace {

void check_shapes(const NetworkParams& p, const NetworkConfig& c) {
  const NetworkParams ref = NetworkParams::zeros(c);
  const auto a = p.tensors();
  const auto b = ref.tensors();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->size() != b[i]->size()) {
      throw std::invalid_argument(std::string("network: tensor ") + NetworkParams::kNames[i] + " has " +
                                  std::to_string(a[i]->size()) + " values, config implies " +
                                  std::to_string(b[i]->size()));
    }
  }
}

void check_window(const Matrix& window, const NetworkConfig& c) {
  if (window.rows() != c.in_channels || window.cols() != c.window_len) {
    throw std::invalid_argument("network: window is " + std::to_string(window.rows()) + "x" +
                                std::to_string(window.cols()) + ", expected " + std::to_string(c.in_channels) +
                                "x" + std::to_string(c.window_len));
  }
}

}  // namespace

// --- layers --------------------------------------------------------------------

Matrix conv1d_forward(const Matrix& input, std::span<const double> kernels, std::span<const double> biases,
                      std::size_t filters, std::size_t kernel, std::size_t stride) {
  const std::size_t channels = input.rows();
  const std::size_t len = input.cols();
  if (kernel == 0 || stride == 0 || filters == 0) throw std::invalid_argument("conv1d: zero kernel/stride/filters");
  if (len < kernel) throw std::invalid_argument("conv1d: input shorter than kernel");
  if (kernels.size() != filters * channels * kernel) throw std::invalid_argument("conv1d: kernel shape mismatch");
  if (!biases.empty() && biases.size() != filters) throw std::invalid_argument("conv1d: bias shape mismatch");

  const std::size_t out_len = (len - kernel) / stride + 1;
  Matrix out(filters, out_len);
  for (std::size_t f = 0; f < filters; ++f) {
    auto z = out.row(f);
    const double b = biases.empty() ? 0.0 : biases[f];
    for (double& v : z) v = b;
    for (std::size_t c = 0; c < channels; ++c) {
      const auto x = input.row(c);
      const double* w = kernels.data() + (f * channels + c) * kernel;
      for (std::size_t j = 0; j < kernel; ++j) {
        const double wj = w[j];
        const double* xs = x.data() + j;
        if (stride == 1) {
          for (std::size_t t = 0; t < out_len; ++t) z[t] += wj * xs[t];
        } else {
          for (std::size_t t = 0; t < out_len; ++t) z[t] += wj * xs[t * stride];
        }
      }
    }
  }
  return out;
}

void leaky_relu_inplace(std::span<double> x, double slope) {
  for (double& v : x) v = leaky_relu(v, slope);
}

Matrix max_pool1d(const Matrix& x, std::size_t pool, std::vector<std::size_t>* argmax) {
  if (pool == 0) throw std::invalid_argument("max_pool1d: pool size must be >= 1");
  if (x.cols() < pool) {
    throw std::invalid_argument("max_pool1d: input length " + std::to_string(x.cols()) +
                                " shorter than pool size " + std::to_string(pool));
  }
  const std::size_t out_len = x.cols() / pool;
  Matrix out(x.rows(), out_len);
  if (argmax) argmax->assign(x.rows() * out_len, 0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    for (std::size_t j = 0; j < out_len; ++j) {
      std::size_t best = j * pool;
      for (std::size_t k = best + 1; k < (j + 1) * pool; ++k) {
        if (row[k] > row[best]) best = k;
      }
      out(r, j) = row[best];
      if (argmax) (*argmax)[r * out_len + j] = best;
    }
  }
  return out;
}

namespace {

// Intermediate activations of one example, kept for the backward pass.
struct Trace {
  Matrix conv_pre;  // F x L1 before activation
  std::vector<std::size_t> argmax;  // F*L2, column in conv output
  std::vector<double> flat;         // F*L2
  std::vector<double> hidden_pre;   // H
  std::vector<double> hidden;       // H
  std::vector<double> out;          // out_dim
};

void forward_trace(const NetworkParams& p, const NetworkConfig& c, const Matrix& window, Trace& tr) {
  tr.conv_pre = conv1d_forward(window, p.conv_w, p.conv_b, c.filters, c.kernel, c.stride);
  Matrix act = tr.conv_pre;
  leaky_relu_inplace(act.data(), c.leaky_slope);
  const Matrix pooled = max_pool1d(act, c.pool, &tr.argmax);
  tr.flat = pooled.data();  // row-major F x L2 is the channel-major flatten

  const std::size_t h = c.hidden;
  tr.hidden_pre = p.b1;
  for (std::size_t i = 0; i < tr.flat.size(); ++i) {
    const double xi = tr.flat[i];
    const double* w = p.w1.data() + i * h;
    for (std::size_t k = 0; k < h; ++k) tr.hidden_pre[k] += xi * w[k];
  }
  tr.hidden = tr.hidden_pre;
  leaky_relu_inplace(tr.hidden, c.leaky_slope);

  const std::size_t o = c.out_dim();
  tr.out = p.b2;
  for (std::size_t k = 0; k < h; ++k) {
    const double hk = tr.hidden[k];
    const double* w = p.w2.data() + k * o;
    for (std::size_t j = 0; j < o; ++j) tr.out[j] += hk * w[j];
  }
}

inline double leaky_grad(double pre, double slope) { return pre >= 0.0 ? 1.0 : slope; }

}  // namespace

std::vector<double> forward(const NetworkParams& params, const NetworkConfig& config, const Matrix& window) {
  config.validate();
  check_shapes(params, config);
  check_window(window, config);
  Trace tr;
  forward_trace(params, config, window, tr);
  return tr.out;
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw std::invalid_argument("mse_loss: length mismatch");
  if (pred.empty()) throw std::invalid_argument("mse_loss: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

namespace {

Gradients backward_impl(const NetworkParams& params, const NetworkConfig& c,
                        std::span<const TrainingExample* const> batch) {
  if (batch.empty()) throw std::invalid_argument("backward: empty batch");

  Gradients g{NetworkParams::zeros(c), 0.0};
  auto& gr = g.grads;
  const std::size_t h = c.hidden;
  const std::size_t o = c.out_dim();
  const std::size_t l2 = c.pooled_len();
  const std::size_t m = c.kernel;
  const double scale = 2.0 / static_cast<double>(batch.size() * o);

  Trace tr;
  std::vector<double> d_out(o);
  std::vector<double> d_hidden(h);
  double sq_sum = 0.0;

  for (const TrainingExample* ex_ptr : batch) {
    const TrainingExample& ex = *ex_ptr;
    check_window(ex.window, c);
    if (ex.label.size() != o) throw std::invalid_argument("backward: label length does not match out_dim");
    forward_trace(params, c, ex.window, tr);

    for (std::size_t j = 0; j < o; ++j) {
      const double d = tr.out[j] - ex.label[j];
      sq_sum += d * d;
      d_out[j] = scale * d;
    }

    // fc2
    for (std::size_t j = 0; j < o; ++j) gr.b2[j] += d_out[j];
    for (std::size_t k = 0; k < h; ++k) {
      const double* w = params.w2.data() + k * o;
      double* gw = gr.w2.data() + k * o;
      double acc = 0.0;
      for (std::size_t j = 0; j < o; ++j) {
        gw[j] += tr.hidden[k] * d_out[j];
        acc += w[j] * d_out[j];
      }
      d_hidden[k] = acc * leaky_grad(tr.hidden_pre[k], c.leaky_slope);
    }

    // fc1, then straight through the pool into the conv layer
    for (std::size_t k = 0; k < h; ++k) gr.b1[k] += d_hidden[k];
    for (std::size_t i = 0; i < tr.flat.size(); ++i) {
      const double xi = tr.flat[i];
      const double* w = params.w1.data() + i * h;
      double* gw = gr.w1.data() + i * h;
      double d_flat = 0.0;
      for (std::size_t k = 0; k < h; ++k) {
        gw[k] += xi * d_hidden[k];
        d_flat += w[k] * d_hidden[k];
      }

      const std::size_t f = i / l2;
      const std::size_t pos = tr.argmax[i];
      const double dz = d_flat * leaky_grad(tr.conv_pre(f, pos), c.leaky_slope);
      if (dz == 0.0) continue;
      if (!gr.conv_b.empty()) gr.conv_b[f] += dz;
      for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
        const double* x = ex.window.row(ch).data() + pos * c.stride;
        double* gw_conv = gr.conv_w.data() + (f * c.in_channels + ch) * m;
        for (std::size_t j = 0; j < m; ++j) gw_conv[j] += dz * x[j];
      }
    }
  }
  g.loss = sq_sum / static_cast<double>(batch.size() * o);
  return g;
}

}  // namespace

Gradients backward(const NetworkParams& params, const NetworkConfig& config, std::span<const TrainingExample> batch) {
  config.validate();
  check_shapes(params, config);
  std::vector<const TrainingExample*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& ex : batch) ptrs.push_back(&ex);
  return backward_impl(params, config, ptrs);
}

// --- optimizer -----------------------------------------------------------------

AdamState AdamState::zeros(const NetworkConfig& config) {
  return {NetworkParams::zeros(config), NetworkParams::zeros(config)};
}

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state, std::size_t t, double lr,
               const AdamConfig& adam) {
  if (t == 0) throw std::invalid_argument("adam_step: t starts at 1");
  const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(t));
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g[i]->size() != p[i]->size() || m[i]->size() != p[i]->size() || v[i]->size() != p[i]->size()) {
      throw std::invalid_argument(std::string("adam_step: shape mismatch in ") + NetworkParams::kNames[i]);
    }
    auto& pt = *p[i];
    const auto& gt = *g[i];
    auto& mt = *m[i];
    auto& vt = *v[i];
    for (std::size_t k = 0; k < pt.size(); ++k) {
      mt[k] = adam.beta1 * mt[k] + (1.0 - adam.beta1) * gt[k];
      vt[k] = adam.beta2 * vt[k] + (1.0 - adam.beta2) * gt[k] * gt[k];
      const double m_hat = mt[k] / c1;
      const double v_hat = vt[k] / c2;
      pt[k] -= lr * m_hat / (std::sqrt(v_hat) + adam.epsilon);
    }
  }
}

// --- training ------------------------------------------------------------------

void TrainConfig::validate() const {
  if (batch_size == 0 || epochs == 0 || decay_every == 0) {
    throw std::invalid_argument("train config: batch size, epochs and decay period must be >= 1");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("train config: learning rate must be finite and >= 0");
  }
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw std::invalid_argument("train config: decay must be in (0, 1]");
}

double TrainConfig::lr_at(std::size_t epoch) const {
  return learning_rate * std::pow(lr_decay, static_cast<double>(epoch / decay_every));
}

TrainReport train(std::span<const TrainingExample> train_set, const NetworkConfig& net, const TrainConfig& config,
                  const std::function<void(const EpochStat&)>& on_epoch) {
  net.validate();
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  for (const auto& ex : train_set) {
    check_window(ex.window, net);
    if (ex.label.size() != net.out_dim()) throw std::invalid_argument("train: label length does not match network");
  }

  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = config.seed;
  report.params = initial_params(net, config.seed);
  AdamState state = AdamState::zeros(net);

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::vector<const TrainingExample*> batch;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    RandomStream rng(derive_seed({config.seed, kShuffleStream, epoch}));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

    const double lr = config.lr_at(epoch);
    double loss_sum = 0.0;
    for (std::size_t b = 0, start_idx = 0; start_idx < n; ++b, start_idx += config.batch_size) {
      const std::size_t end = std::min(n, start_idx + config.batch_size);
      batch.clear();
      for (std::size_t i = start_idx; i < end; ++i) batch.push_back(&train_set[order[i]]);
      const Gradients g = backward_impl(report.params, net, batch);
      if (!std::isfinite(g.loss)) {
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                            std::to_string(b + 1));
      }
      loss_sum += g.loss * static_cast<double>(end - start_idx);
      adam_step(report.params, g.grads, state, ++step, lr, config.adam);
    }
    const EpochStat stat{epoch + 1, loss_sum / static_cast<double>(n), lr};
    report.epochs.push_back(stat);
    if (on_epoch) on_epoch(stat);
  }
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void write_training_log(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,train_loss,lr\n";
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.lr) << '\n';
  }
}

// --- model + checkpoint ----------------------------------------------------------

CnnModel::CnnModel(NetworkConfig config, NetworkParams params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  check_shapes(params_, config_);
}

std::vector<double> CnnModel::predict(const Matrix& window) const {
  check_window(window, config_);
  Trace tr;
  forward_trace(params_, config_, window, tr);
  return tr.out;
}

using nlohmann::json;

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  check_shapes(ck.params, ck.config);
  json j;
  j["format"] = kCheckpointFormat;
  j["seed"] = ck.seed;
  j["window_s"] = ck.window_s;
  j["sample_rate_hz"] = ck.sample_rate_hz;
  const auto& c = ck.config;
  j["config"] = {{"in_channels", c.in_channels}, {"window_len", c.window_len}, {"filters", c.filters},
                 {"kernel", c.kernel},           {"stride", c.stride},         {"conv_bias", c.conv_bias},
                 {"leaky_slope", c.leaky_slope}, {"pool", c.pool},             {"hidden", c.hidden},
                 {"out_dim", c.out_dim()},       {"flatten", "channel-major"}};
  json tensors;
  const auto ts = ck.params.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) tensors[NetworkParams::kNames[i]] = *ts[i];
  j["params"] = std::move(tensors);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  Checkpoint ck;
  try {
    const json j = json::parse(in);
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw std::runtime_error("unsupported checkpoint format '" + j.at("format").get<std::string>() + "'");
    }
    ck.seed = j.at("seed").get<std::uint64_t>();
    ck.window_s = j.at("window_s").get<double>();
    ck.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    const auto& c = j.at("config");
    ck.config.in_channels = c.at("in_channels").get<std::size_t>();
    ck.config.window_len = c.at("window_len").get<std::size_t>();
    ck.config.filters = c.at("filters").get<std::size_t>();
    ck.config.kernel = c.at("kernel").get<std::size_t>();
    ck.config.stride = c.at("stride").get<std::size_t>();
    ck.config.conv_bias = c.at("conv_bias").get<bool>();
    ck.config.leaky_slope = c.at("leaky_slope").get<double>();
    ck.config.pool = c.at("pool").get<std::size_t>();
    ck.config.hidden = c.at("hidden").get<std::size_t>();
    auto ts = ck.params.tensors();
    for (std::size_t i = 0; i < ts.size(); ++i) {
      *ts[i] = j.at("params").at(NetworkParams::kNames[i]).get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed checkpoint " + path.string() + ": " + e.what());
  }
  ck.config.validate();
  check_shapes(ck.params, ck.config);
  return ck;
}

}  // namespace gyrocal::nn
