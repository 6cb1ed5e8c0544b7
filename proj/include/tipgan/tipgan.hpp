#pragma once

// Multi-generator adversarial exploration: n generators propose
// configurations, one discriminator with an origin head (n+1-way softmax)
// and a stability head (sigmoid of the On probability) judges them, and the
// box model labels every proposal.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tipgan/config.hpp"
#include "tipgan/errors.hpp"
#include "tipgan/explorer.hpp"
#include "tipgan/io.hpp"
#include "tipgan/losses.hpp"
#include "tipgan/nn.hpp"
#include "tipgan/oracle.hpp"

namespace tipgan {

inline constexpr int kCheckpointVersion = 1;

struct GanSpec {
  int n_generators = 3;
  int batch_size = 32;  // m, per generator and for the real batch
  int latent_dim = 8;
  int hidden = 64;
  int steps = 1000;
  std::uint64_t seed = 1;
  double mad_weight = 1.0;
  double clf_weight = 1.0;
  double lr_discriminator = 1e-3;
  double lr_generator = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  bool train_generators = true;
  Bounds bounds = Bounds::experiment();

  void validate() const {
    if (n_generators < 1) fail(ErrorKind::InvalidArgument, "n_generators must be at least 1");
    if (batch_size < 1) fail(ErrorKind::InvalidArgument, "batch_size must be at least 1");
    if (latent_dim < 1 || hidden < 1) fail(ErrorKind::InvalidArgument, "network sizes must be positive");
    if (steps < 0) fail(ErrorKind::InvalidArgument, "steps must be non-negative");
    if (!(mad_weight >= 0.0) || !(clf_weight >= 0.0))
      fail(ErrorKind::InvalidArgument, "loss weights must be non-negative");
    if (!(lr_discriminator > 0.0) || !(lr_generator > 0.0))
      fail(ErrorKind::InvalidArgument, "learning rates must be positive");
    bounds.validate();
  }

  /// Configurations consumed by one discriminator update.
  int samples_per_update() const { return batch_size * (n_generators + 1); }

  nlohmann::json to_json() const {
    return {{"n_generators", n_generators}, {"batch_size", batch_size},   {"latent_dim", latent_dim},
            {"hidden", hidden},             {"steps", steps},             {"seed", seed},
            {"mad_weight", mad_weight},     {"clf_weight", clf_weight},   {"lr_discriminator", lr_discriminator},
            {"lr_generator", lr_generator}, {"beta1", beta1},             {"beta2", beta2},
            {"train_generators", train_generators}, {"bounds", bounds_to_json(bounds)}};
  }

  static GanSpec from_json(const nlohmann::json& j) {
    GanSpec s;
    s.n_generators = j.at("n_generators").get<int>();
    s.batch_size = j.at("batch_size").get<int>();
    s.latent_dim = j.at("latent_dim").get<int>();
    s.hidden = j.at("hidden").get<int>();
    s.steps = j.at("steps").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.mad_weight = j.at("mad_weight").get<double>();
    s.clf_weight = j.at("clf_weight").get<double>();
    s.lr_discriminator = j.at("lr_discriminator").get<double>();
    s.lr_generator = j.at("lr_generator").get<double>();
    s.beta1 = j.at("beta1").get<double>();
    s.beta2 = j.at("beta2").get<double>();
    s.train_generators = j.at("train_generators").get<bool>();
    s.bounds = bounds_from_json(j.at("bounds"));
    s.validate();
    return s;
  }
};

/// One update's worth of samples. Rows of `normalized` are ordered real
/// first, then generator 1, ..., generator n, each block `m` rows long.
struct TrainBatch {
  std::vector<Config> configs;
  std::vector<OriginTag> origins;
  std::vector<double> labels;  // oracle or dataset label, 1 = On
  nn::Matrix normalized;       // inputs to the discriminator
  std::vector<nn::Matrix> latent;  // z per generator

  std::size_t size() const { return configs.size(); }
};

struct TrainStats {
  int step = 0;
  double l_mad = 0.0;  // discriminator origin loss
  double l_clf = 0.0;  // discriminator stability loss
  double l_tip = 0.0;
  std::vector<double> generator_loss;     // per generator, weighted sum of its terms
  std::vector<double> fraction_in_region; // per generator
  double origin_accuracy = 0.0;
  double stability_accuracy = 0.0;
};

inline void write_stats_header(std::ostream& out, int n) {
  out << "step,l_mad,l_clf,l_tip,origin_acc,stability_acc";
  for (int i = 1; i <= n; ++i) out << ",g" << i << "_loss";
  for (int i = 1; i <= n; ++i) out << ",g" << i << "_in_region";
  out << "\n";
}

inline void write_stats_row(std::ostream& out, const TrainStats& s) {
  out << s.step << ',' << io::fmt(s.l_mad) << ',' << io::fmt(s.l_clf) << ',' << io::fmt(s.l_tip) << ','
      << io::fmt(s.origin_accuracy) << ',' << io::fmt(s.stability_accuracy);
  for (double v : s.generator_loss) out << ',' << io::fmt(v);
  for (double v : s.fraction_in_region) out << ',' << io::fmt(v);
  out << "\n";
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeds derived from the run seed: 0 = discriminator, i = generator i,
/// n+1 = sampling stream.
inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t k) { return splitmix64(seed * 1000003ULL + k); }

/// Numerically stable softmax over the first `classes` columns.
inline nn::Matrix softmax_head(const nn::Matrix& logits, int classes) {
  nn::Matrix p = logits.leftCols(classes);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double mx = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - mx).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

inline std::vector<double> sigmoid_column(const nn::Matrix& logits, Eigen::Index col) {
  std::vector<double> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) out[static_cast<std::size_t>(r)] = nn::sigmoid(logits(r, col));
  return out;
}

inline nn::Matrix to_matrix(const std::vector<std::array<double, 3>>& rows) {
  nn::Matrix m(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int k = 0; k < 3; ++k) m(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
  return m;
}

inline double finite_or_throw(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorKind::NonFiniteLoss, std::string("non-finite ") + what);
  return v;
}

}  // namespace detail

inline nn::Mlp make_generator(const GanSpec& spec, std::uint64_t seed) {
  return nn::Mlp::initialized({spec.latent_dim, spec.hidden, spec.hidden, 3}, nn::Activation::Elu,
                              nn::Activation::Sigmoid, seed);
}

inline nn::Mlp make_discriminator(const GanSpec& spec, std::uint64_t seed) {
  return nn::Mlp::initialized({3, spec.hidden, spec.hidden, spec.n_generators + 2}, nn::Activation::Elu,
                              nn::Activation::Linear, seed);
}

/// Generator outputs in the unit cube mapped into the box; the clamp only
/// guards against rounding at the edges.
inline Config unit_to_config(const Bounds& b, double u0, double u1, double u2) {
  Config c = b.denormalize({u0, u1, u2});
  c.d_low0 = std::clamp(c.d_low0, b.d_low0.lo, b.d_low0.hi);
  c.m_ek = std::clamp(c.m_ek, b.m_ek.lo, b.m_ek.hi);
  c.fw_n = std::clamp(c.fw_n, b.fw_n.lo, b.fw_n.hi);
  return c;
}

/// `count` configs from one generator; deterministic per seed.
inline std::vector<Config> generate(const nn::Mlp& generator, std::size_t count, std::uint64_t seed,
                                    const Bounds& bounds = Bounds::experiment()) {
  if (count == 0) return {};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  nn::Matrix z(static_cast<Eigen::Index>(count), generator.input_size());
  for (Eigen::Index r = 0; r < z.rows(); ++r)
    for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = normal(rng);
  const nn::Matrix u = generator.forward(z);
  std::vector<Config> out;
  out.reserve(count);
  for (Eigen::Index r = 0; r < u.rows(); ++r) out.push_back(unit_to_config(bounds, u(r, 0), u(r, 1), u(r, 2)));
  return out;
}

/// Probability that `config` ends in the On state, from the stability head.
inline double predict_shutoff(const nn::Mlp& discriminator, const Config& config,
                              const Bounds& bounds = Bounds::experiment()) {
  require_in_bounds(config, bounds);
  const auto u = bounds.normalize(config);
  nn::Matrix x(1, 3);
  x << u[0], u[1], u[2];
  const nn::Matrix logits = discriminator.forward(x);
  return nn::sigmoid(logits(0, logits.cols() - 1));
}

inline std::vector<double> predict_shutoff(const nn::Mlp& discriminator, std::span<const Config> configs,
                                           const Bounds& bounds = Bounds::experiment()) {
  std::vector<std::array<double, 3>> rows;
  rows.reserve(configs.size());
  for (const auto& c : configs) {
    require_in_bounds(c, bounds);
    rows.push_back(bounds.normalize(c));
  }
  if (rows.empty()) return {};
  const nn::Matrix logits = discriminator.forward(detail::to_matrix(rows));
  return detail::sigmoid_column(logits, logits.cols() - 1);
}

using RegionPredicate = std::function<bool(const Config&)>;

/// The adversarial game and its optimizer state.
class TipGan {
 public:
  TipGan(GanSpec spec, const Dataset& data, const Oracle& oracle, RegionPredicate in_region = in_reference_band,
         int jobs = 1)
      : spec_(std::move(spec)), data_(&data), oracle_(&oracle), in_region_(std::move(in_region)), jobs_(jobs) {
    spec_.validate();
    if (data.samples.empty()) fail(ErrorKind::EmptyInput, "training dataset is empty");
    discriminator_ = make_discriminator(spec_, detail::derived_seed(spec_.seed, 0));
    d_adam_ = nn::AdamState::for_network(discriminator_, {spec_.lr_discriminator, spec_.beta1, spec_.beta2, 1e-8});
    for (int i = 1; i <= spec_.n_generators; ++i) {
      generators_.push_back(make_generator(spec_, detail::derived_seed(spec_.seed, static_cast<std::uint64_t>(i))));
      g_adam_.push_back(nn::AdamState::for_network(generators_.back(),
                                                   {spec_.lr_generator, spec_.beta1, spec_.beta2, 1e-8}));
    }
    rng_.seed(detail::derived_seed(spec_.seed, static_cast<std::uint64_t>(spec_.n_generators) + 1));
  }

  const GanSpec& spec() const { return spec_; }
  int steps_done() const { return step_; }
  const nn::Mlp& discriminator() const { return discriminator_; }
  const std::vector<nn::Mlp>& generators() const { return generators_; }

  /// Draws real and generated samples and labels the generated ones.
  TrainBatch draw_batch() {
    const int m = spec_.batch_size;
    const int n = spec_.n_generators;
    TrainBatch b;
    std::vector<std::array<double, 3>> rows;
    std::uniform_int_distribution<std::size_t> pick(0, data_->samples.size() - 1);
    for (int r = 0; r < m; ++r) {
      const auto& s = data_->samples[pick(rng_)];
      b.configs.push_back(s.config);
      b.origins.push_back(0);
      b.labels.push_back(s.label == Label::On ? 1.0 : 0.0);
      rows.push_back(spec_.bounds.normalize(s.config));
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      nn::Matrix z(m, spec_.latent_dim);
      for (Eigen::Index r = 0; r < z.rows(); ++r)
        for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = normal(rng_);
      const nn::Matrix u = generators_[static_cast<std::size_t>(i)].forward(z);
      for (Eigen::Index r = 0; r < u.rows(); ++r) {
        const Config c = unit_to_config(spec_.bounds, u(r, 0), u(r, 1), u(r, 2));
        require_in_bounds(c, spec_.bounds);
        b.configs.push_back(c);
        b.origins.push_back(i + 1);
        rows.push_back({u(r, 0), u(r, 1), u(r, 2)});
      }
      b.latent.push_back(std::move(z));
    }
    b.normalized = detail::to_matrix(rows);

    // oracle labels for the generated block
    const std::size_t gen = b.configs.size() - static_cast<std::size_t>(m);
    std::vector<double> gl(gen, 0.0);
    if (spec_.clf_weight > 0.0) {
      parallel_for(gen, jobs_, [&](std::size_t k) {
        const Config& c = b.configs[static_cast<std::size_t>(m) + k];
        try {
          gl[k] = oracle_->run(c).label == Label::On ? 1.0 : 0.0;
        } catch (const Error& e) {
          throw Error(ErrorKind::OracleFailure, e.message() + " [config " + describe(c) + "]");
        }
      });
    }
    b.labels.insert(b.labels.end(), gl.begin(), gl.end());
    return b;
  }

  /// One alternating update: discriminator first, then every generator.
  TrainStats step() {
    const int m = spec_.batch_size;
    const int n = spec_.n_generators;
    const TrainBatch batch = draw_batch();
    const auto rows = static_cast<Eigen::Index>(batch.size());
    TrainStats st;
    st.step = step_ + 1;

    // discriminator
    const nn::ForwardTrace dt = discriminator_.forward_trace(batch.normalized);
    const nn::Matrix probs = detail::softmax_head(dt.output, n + 1);
    const std::vector<double> on = detail::sigmoid_column(dt.output, n + 1);
    const MadLoss mad = loss_mad(probs, batch.origins);
    // generated rows only count towards the stability loss when labeled
    const std::size_t labeled = spec_.clf_weight > 0.0 ? batch.size() : static_cast<std::size_t>(m);
    const ClfLoss clf = loss_clf(std::span(on).first(labeled), std::span(batch.labels).first(labeled), {});
    nn::Matrix up = nn::Matrix::Zero(rows, n + 2);
    up.leftCols(n + 1) = spec_.mad_weight * mad.discriminator_grad;
    for (std::size_t r = 0; r < labeled; ++r)
      up(static_cast<Eigen::Index>(r), n + 1) = spec_.clf_weight * clf.discriminator_grad(static_cast<Eigen::Index>(r));
    st.l_mad = detail::finite_or_throw(mad.discriminator, "origin loss");
    st.l_clf = detail::finite_or_throw(clf.discriminator, "stability loss");
    st.l_tip = spec_.mad_weight * st.l_mad + spec_.clf_weight * st.l_clf;

    std::size_t origin_hits = 0, stability_hits = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      Eigen::Index best = 0;
      probs.row(r).maxCoeff(&best);
      origin_hits += static_cast<int>(best) == batch.origins[static_cast<std::size_t>(r)];
    }
    for (std::size_t r = 0; r < labeled; ++r) stability_hits += (on[r] >= 0.5) == (batch.labels[r] == 1.0);
    st.origin_accuracy = static_cast<double>(origin_hits) / static_cast<double>(rows);
    st.stability_accuracy = static_cast<double>(stability_hits) / static_cast<double>(labeled);

    nn::adam_step(d_adam_, discriminator_, discriminator_.backward(dt, up).layers);

    // generators, against the updated discriminator
    for (int i = 0; i < n; ++i) {
      auto& g = generators_[static_cast<std::size_t>(i)];
      const nn::ForwardTrace gt = g.forward_trace(batch.latent[static_cast<std::size_t>(i)]);
      const nn::ForwardTrace ft = discriminator_.forward_trace(gt.output);
      const nn::Matrix p = detail::softmax_head(ft.output, n + 1);
      const std::vector<double> q = detail::sigmoid_column(ft.output, n + 1);
      nn::Matrix gup = nn::Matrix::Zero(m, n + 2);
      double g_mad = 0.0;
      for (Eigen::Index r = 0; r < m; ++r) {
        g_mad += -safe_log(p(r, 0)) / m;
        for (int c = 0; c <= n; ++c) gup(r, c) = spec_.mad_weight * (p(r, c) - (c == 0 ? 1.0 : 0.0)) / m;
      }
      const ClfLoss unc = loss_clf({}, {}, q);
      for (Eigen::Index r = 0; r < m; ++r) gup(r, n + 1) = spec_.clf_weight * unc.generator_grad(r);
      const double g_loss = spec_.mad_weight * g_mad + spec_.clf_weight * unc.generator;
      st.generator_loss.push_back(detail::finite_or_throw(g_loss, "generator loss"));

      std::size_t inside = 0;
      for (int r = 0; r < m; ++r) inside += in_region_(batch.configs[static_cast<std::size_t>((i + 1) * m + r)]);
      st.fraction_in_region.push_back(static_cast<double>(inside) / m);

      if (spec_.train_generators) {
        const nn::Gradients dg = discriminator_.backward(ft, gup);
        nn::adam_step(g_adam_[static_cast<std::size_t>(i)], g, g.backward(gt, dg.input).layers);
      }
    }
    if (!discriminator_.all_finite()) fail(ErrorKind::NonFiniteLoss, "discriminator parameters diverged");
    for (const auto& g : generators_)
      if (!g.all_finite()) fail(ErrorKind::NonFiniteLoss, "generator parameters diverged");
    ++step_;
    return st;
  }

  nlohmann::json checkpoint() const {
    std::ostringstream rng_state;
    rng_state << rng_;
    nlohmann::json gens = nlohmann::json::array(), gadam = nlohmann::json::array(), seeds = nlohmann::json::array();
    for (std::size_t i = 0; i < generators_.size(); ++i) {
      gens.push_back(nn::to_json(generators_[i]));
      gadam.push_back(nn::to_json(g_adam_[i]));
    }
    for (int k = 0; k <= spec_.n_generators + 1; ++k)
      seeds.push_back(detail::derived_seed(spec_.seed, static_cast<std::uint64_t>(k)));
    return {{"format_version", kCheckpointVersion},
            {"spec", spec_.to_json()},
            {"step", step_},
            {"seed_lineage", {{"run_seed", spec_.seed}, {"derived", seeds}}},
            {"rng_state", rng_state.str()},
            {"discriminator", nn::to_json(discriminator_)},
            {"discriminator_adam", nn::to_json(d_adam_)},
            {"generators", gens},
            {"generators_adam", gadam}};
  }

  /// Restores networks, optimizer state and sampling stream from a checkpoint.
  void restore(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != kCheckpointVersion)
      fail(ErrorKind::Parse, "unsupported checkpoint version");
    const GanSpec s = GanSpec::from_json(j.at("spec"));
    if (s.n_generators != spec_.n_generators) fail(ErrorKind::ShapeMismatch, "checkpoint generator count differs");
    spec_ = s;
    step_ = j.at("step").get<int>();
    std::istringstream rs(j.at("rng_state").get<std::string>());
    rs >> rng_;
    discriminator_ = nn::mlp_from_json(j.at("discriminator"));
    d_adam_ = nn::adam_from_json(j.at("discriminator_adam"));
    for (std::size_t i = 0; i < generators_.size(); ++i) {
      generators_[i] = nn::mlp_from_json(j.at("generators").at(i));
      g_adam_[i] = nn::adam_from_json(j.at("generators_adam").at(i));
    }
  }

 private:
  GanSpec spec_;
  const Dataset* data_;
  const Oracle* oracle_;
  RegionPredicate in_region_;
  int jobs_;
  nn::Mlp discriminator_;
  nn::AdamState d_adam_;
  std::vector<nn::Mlp> generators_;
  std::vector<nn::AdamState> g_adam_;
  std::mt19937_64 rng_;
  int step_ = 0;
};

/// Networks loaded from a checkpoint, enough for generation and prediction.
struct TrainedModel {
  GanSpec spec;
  nn::Mlp discriminator;
  std::vector<nn::Mlp> generators;
  int steps = 0;

  static TrainedModel from_checkpoint(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != kCheckpointVersion)
      fail(ErrorKind::Parse, "unsupported checkpoint version");
    TrainedModel t;
    t.spec = GanSpec::from_json(j.at("spec"));
    t.steps = j.at("step").get<int>();
    t.discriminator = nn::mlp_from_json(j.at("discriminator"));
    for (const auto& g : j.at("generators")) t.generators.push_back(nn::mlp_from_json(g));
    if (static_cast<int>(t.generators.size()) != t.spec.n_generators)
      fail(ErrorKind::ShapeMismatch, "checkpoint generator count differs from its spec");
    return t;
  }

  static TrainedModel from_gan(const TipGan& g) {
    return TrainedModel{g.spec(), g.discriminator(), g.generators(), g.steps_done()};
  }
};

/// A generated sample tagged with the generator (1-based) that produced it.
struct GeneratedSample {
  Config config;
  int origin = 1;
};

/// `count` samples spread round-robin over the generators; deterministic per seed.
inline std::vector<GeneratedSample> generate_mixture(const TrainedModel& model, std::size_t count, std::uint64_t seed) {
  const std::size_t n = model.generators.size();
  std::vector<GeneratedSample> out;
  out.reserve(count);
  std::vector<std::vector<Config>> per(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t share = count / n + (i < count % n ? 1 : 0);
    per[i] = generate(model.generators[i], share, detail::derived_seed(seed, i + 1), model.spec.bounds);
  }
  std::vector<std::size_t> next(n, 0);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = k % n;
    out.push_back({per[i][next[i]++], static_cast<int>(i + 1)});
  }
  return out;
}

struct TrainOptions {
  std::optional<std::filesystem::path> stats_csv;
  std::optional<std::filesystem::path> checkpoint;
  int checkpoint_every = 0;  // steps; 0 writes only the final checkpoint
};

/// Runs spec.steps updates, streaming stats and checkpointing on schedule.
/// On failure the last written checkpoint stays on disk.
inline std::vector<TrainStats> train(TipGan& gan, const TrainOptions& opt = {}) {
  std::vector<TrainStats> all;
  std::optional<std::ofstream> csv;
  if (opt.stats_csv) {
    csv.emplace(io::open_out(*opt.stats_csv));
    write_stats_header(*csv, gan.spec().n_generators);
  }
  auto save = [&] {
    if (!opt.checkpoint) return;
    const auto tmp = opt.checkpoint->string() + ".tmp";
    {
      auto out = io::open_out(tmp);
      out << gan.checkpoint().dump() << "\n";
    }
    std::filesystem::rename(tmp, *opt.checkpoint);
  };
  while (gan.steps_done() < gan.spec().steps) {
    all.push_back(gan.step());
    if (csv) write_stats_row(*csv, all.back());
    if (opt.checkpoint_every > 0 && gan.steps_done() % opt.checkpoint_every == 0) save();
  }
  save();
  return all;
}

inline constexpr const char* kSampleHeader = "d_low0,m_ek,fw_n,label,final_m_n,origin";

}  // namespace tipgan
