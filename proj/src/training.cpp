#include "spherereg/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

#include "spherereg/io.hpp"
#include "spherereg/parallel.hpp"
#include "spherereg/rng.hpp"

namespace spherereg {

LossResult contrastive_loss(const Eigen::MatrixXd& desc_p, const Eigen::MatrixXd& desc_q, double margin_pos,
                            double margin_neg) {
  const Eigen::Index b = desc_p.cols();
  if (b < 2) throw ConfigError("contrastive loss needs a batch of at least 2 pairs");
  if (desc_q.cols() != b || desc_q.rows() != desc_p.rows()) throw ConfigError("descriptor batches differ in shape");
  Eigen::MatrixXd dist(b, b);
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index j = 0; j < b; ++j) dist(i, j) = (desc_p.col(i) - desc_q.col(j)).norm();

  LossResult out;
  out.grad_p = Eigen::MatrixXd::Zero(desc_p.rows(), b);
  out.grad_q = Eigen::MatrixXd::Zero(desc_q.rows(), b);
  const double scale = 1.0 / static_cast<double>(b);
  // d|p - q| / dp scaled by `coeff`, applied to columns ip of P and iq of Q.
  auto push = [&](Eigen::Index ip, Eigen::Index iq, double coeff) {
    const double d = dist(ip, iq);
    if (d == 0.0) return;
    const Eigen::VectorXd g = coeff * (desc_p.col(ip) - desc_q.col(iq)) / d;
    out.grad_p.col(ip) += g;
    out.grad_q.col(iq) -= g;
  };
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double pos = dist(i, i);
    if (pos > margin_pos) {
      total += pos - margin_pos;
      push(i, i, scale);
    }
    Eigen::Index row_j = -1, col_j = -1;
    for (Eigen::Index j = 0; j < b; ++j) {
      if (j == i) continue;
      if (row_j < 0 || dist(i, j) < dist(i, row_j)) row_j = j;
      if (col_j < 0 || dist(j, i) < dist(col_j, i)) col_j = j;
    }
    const bool use_row = dist(i, row_j) <= dist(col_j, i);
    const double neg = use_row ? dist(i, row_j) : dist(col_j, i);
    if (margin_neg > neg) {
      total += margin_neg - neg;
      if (use_row)
        push(i, row_j, -scale);
      else
        push(col_j, i, -scale);
    }
  }
  out.loss = total * scale;
  return out;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state, double lr,
               const AdamOptions& options) {
  if (grad.size() != params.size()) throw ConfigError("adam: gradient size mismatch");
  if (state.m.size() != params.size()) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
    state.step = 0;
  }
  ++state.step;
  state.m = options.beta1 * state.m + (1.0 - options.beta1) * grad;
  state.v = options.beta2 * state.v + (1.0 - options.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.step));
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + options.epsilon);
}

void TrainConfig::validate() const {
  if (!(margin_pos >= 0.0 && margin_pos < margin_neg)) throw ConfigError("margins need 0 <= pos < neg");
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (epochs < 0) throw ConfigError("epoch count must be non-negative");
  if (decay_every < 1) throw ConfigError("decay interval must be positive");
  if (learning_rate < 0.0) throw ConfigError("learning rate must be non-negative");
}

double learning_rate(const TrainConfig& config, int epoch) {
  return config.learning_rate * std::pow(config.decay_factor, std::floor(static_cast<double>(epoch) / config.decay_every));
}

namespace {

template <typename Gen>
void shuffle_indices(std::vector<std::size_t>& v, Gen& gen) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(gen, i)]);
}

}  // namespace

PatchPairSet build_patch_pairs(const std::vector<SynthPair>& scenes, const EncoderConfig& encoder, int per_scene,
                               double min_separation, std::uint64_t seed, int threads) {
  struct Job {
    std::size_t scene;
    Eigen::Index p, q;
  };
  std::vector<Job> jobs;
  std::vector<int> group;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const auto& corr = scenes[s].correspondences;
    std::vector<std::size_t> order(corr.size());
    std::iota(order.begin(), order.end(), 0);
    Rng gen = make_rng(seed, s);
    shuffle_indices(order, gen);
    std::vector<Vec3> taken;
    for (std::size_t k : order) {
      if (static_cast<int>(taken.size()) >= per_scene) break;
      const Vec3 c = scenes[s].p.point(corr[k].first);
      bool far = true;
      for (const Vec3& t : taken)
        if ((t - c).norm() < min_separation) {
          far = false;
          break;
        }
      if (!far) continue;
      taken.push_back(c);
      jobs.push_back({s, corr[k].first, corr[k].second});
      group.push_back(static_cast<int>(s));
    }
  }
  std::vector<RadiusIndex> p_index, q_index;
  for (const auto& sc : scenes) {
    p_index.emplace_back(sc.p.points, encoder.voxel.radius);
    q_index.emplace_back(sc.q.points, encoder.voxel.radius);
  }
  PatchPairSet set;
  set.source.resize(jobs.size());
  set.target.resize(jobs.size());
  set.group = group;
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const Job& job = jobs[i];
    const SynthPair& sc = scenes[job.scene];
    set.source[i] = encode_patch(radius_neighbors(p_index[job.scene], sc.p.point(job.p), encoder.voxel.radius), encoder).grid;
    set.target[i] = encode_patch(radius_neighbors(q_index[job.scene], sc.q.point(job.q), encoder.voxel.radius), encoder).grid;
  });
  return set;
}

std::pair<double, double> validation_fmr(const PatchPairSet& set, const NetworkWeights& weights, double tau2,
                                         int threads) {
  if (set.size() == 0) throw ConfigError("empty validation set");
  const Eigen::Index n = static_cast<Eigen::Index>(set.size());
  Eigen::MatrixXd dp(weights.arch.descriptor_dim, n), dq(weights.arch.descriptor_dim, n);
  parallel_for(set.size(), threads, [&](std::size_t i) {
    dp.col(static_cast<Eigen::Index>(i)) = forward(set.source[i], weights);
    dq.col(static_cast<Eigen::Index>(i)) = forward(set.target[i], weights);
  });
  std::vector<double> irs;
  for (std::size_t begin = 0; begin < set.size();) {
    std::size_t end = begin;
    while (end < set.size() && set.group[end] == set.group[begin]) ++end;
    int hits = 0;
    for (std::size_t i = begin; i < end; ++i) {
      std::size_t best = begin;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = begin; j < end; ++j) {
        const double d = (dp.col(static_cast<Eigen::Index>(i)) - dq.col(static_cast<Eigen::Index>(j))).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      if (best == i) ++hits;
    }
    irs.push_back(static_cast<double>(hits) / static_cast<double>(end - begin));
    begin = end;
  }
  double passed = 0.0;
  for (double ir : irs) passed += ir > tau2 ? 1.0 : 0.0;
  return {passed / static_cast<double>(irs.size()),
          std::accumulate(irs.begin(), irs.end(), 0.0) / static_cast<double>(irs.size())};
}

namespace {

struct BatchOutcome {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

BatchOutcome run_batch(const PatchPairSet& set, const std::vector<std::size_t>& members, const NetworkWeights& w,
                       const TrainConfig& config, bool want_grad) {
  const std::size_t b = members.size();
  std::vector<ForwardTrace> traces(2 * b);
  parallel_for(2 * b, config.threads, [&](std::size_t k) {
    const std::size_t m = members[k % b];
    traces[k] = forward_trace(k < b ? set.source[m] : set.target[m], w);
  });
  Eigen::MatrixXd dp(w.arch.descriptor_dim, static_cast<Eigen::Index>(b)), dq = dp;
  for (std::size_t i = 0; i < b; ++i) {
    dp.col(static_cast<Eigen::Index>(i)) = traces[i].descriptor;
    dq.col(static_cast<Eigen::Index>(i)) = traces[b + i].descriptor;
  }
  const LossResult loss = contrastive_loss(dp, dq, config.margin_pos, config.margin_neg);
  BatchOutcome out;
  out.loss = loss.loss;
  if (!want_grad) return out;
  std::vector<Eigen::VectorXd> grads(2 * b);
  parallel_for(2 * b, config.threads, [&](std::size_t k) {
    const Eigen::Index col = static_cast<Eigen::Index>(k % b);
    const Eigen::VectorXd up = k < b ? Eigen::VectorXd(loss.grad_p.col(col)) : Eigen::VectorXd(loss.grad_q.col(col));
    if (up.isZero(0.0)) return;
    grads[k] = backward(traces[k], w, up).parameters;
  });
  out.grad = Eigen::VectorXd::Zero(w.parameter_count());
  for (const auto& g : grads)
    if (g.size() > 0) out.grad += g;
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng gen = make_rng(seed, 0x7a1000 + static_cast<std::uint64_t>(epoch));
  shuffle_indices(order, gen);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(n, begin + static_cast<std::size_t>(batch_size));
    if (end - begin < 2) break;  // a single pair has no negatives
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace

TrainResult train(const TrainConfig& config, const NetworkWeights& initial, const PatchPairSet& train_set,
                  const PatchPairSet& validation, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.size() < 2) throw ConfigError("training needs at least 2 patch pairs");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  TrainResult result;
  NetworkWeights w = initial;
  Eigen::VectorXd params = w.flatten();
  AdamState state;

  auto record = [&](int epoch, double lr, double loss) {
    EpochLog row;
    row.epoch = epoch;
    row.lr = lr;
    row.mean_loss = loss;
    if (validation.size() > 0) std::tie(row.val_fmr, row.val_ir) = validation_fmr(validation, w, config.tau2, config.threads);
    row.wall_seconds = elapsed();
    const bool better = result.log.empty() || row.val_fmr > result.log[static_cast<std::size_t>(result.best_epoch)].val_fmr ||
                        (row.val_fmr == result.log[static_cast<std::size_t>(result.best_epoch)].val_fmr &&
                         row.val_ir > result.log[static_cast<std::size_t>(result.best_epoch)].val_ir);
    result.log.push_back(row);
    if (better) {
      result.best = w;
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(row);
  };

  {
    double sum = 0.0;
    const auto batches = make_batches(train_set.size(), config.batch_size, config.seed, 1);
    for (const auto& b : batches) sum += run_batch(train_set, b, w, config, false).loss;
    record(0, learning_rate(config, 0), sum / static_cast<double>(batches.size()));
  }
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = learning_rate(config, epoch);
    const auto batches = make_batches(train_set.size(), config.batch_size, config.seed, epoch);
    double sum = 0.0;
    for (const auto& b : batches) {
      const BatchOutcome out = run_batch(train_set, b, w, config, true);
      sum += out.loss;
      adam_step(params, out.grad, state, lr);
      w.unflatten(params);
    }
    record(epoch, lr, sum / static_cast<double>(batches.size()));
  }
  result.last = w;
  result.optimizer = state;
  return result;
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,lr,mean_loss,val_FMR,wall_seconds\n";
  char buf[192];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.3f\n", r.epoch, r.lr, r.mean_loss, r.val_fmr, r.wall_seconds);
    out += buf;
  }
  return out;
}

namespace {

template <typename T>
void put(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ParseError("optimizer state is truncated", pos);
  T v;
  std::memcpy(&v, in.data() + pos, sizeof v);
  pos += sizeof v;
  return v;
}

}  // namespace

void save_checkpoint(const NetworkWeights& w, const AdamState& state, const std::filesystem::path& path) {
  save_weights(w, path);
  std::string out = "SOPT";
  put(out, static_cast<std::int64_t>(state.step));
  put(out, static_cast<std::uint64_t>(state.m.size()));
  for (Eigen::Index i = 0; i < state.m.size(); ++i) put(out, state.m(i));
  for (Eigen::Index i = 0; i < state.v.size(); ++i) put(out, state.v(i));
  std::filesystem::path opt = path;
  opt += ".opt";
  write_file(opt, out);
}

AdamState load_optimizer_state(const std::filesystem::path& path) {
  std::filesystem::path opt = path;
  opt += ".opt";
  const std::string in = read_file(opt);
  if (in.compare(0, 4, "SOPT") != 0) throw ParseError("not an optimizer state file", 0);
  std::size_t pos = 4;
  AdamState state;
  state.step = take<std::int64_t>(in, pos);
  const auto n = static_cast<Eigen::Index>(take<std::uint64_t>(in, pos));
  if (n < 0 || static_cast<std::size_t>(n) > in.size()) throw ParseError("implausible optimizer size", pos);
  state.m.resize(n);
  state.v.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) state.m(i) = take<double>(in, pos);
  for (Eigen::Index i = 0; i < n; ++i) state.v(i) = take<double>(in, pos);
  return state;
}

}  // namespace spherereg
