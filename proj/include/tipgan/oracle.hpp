#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

#include "tipgan/box_model.hpp"
#include "tipgan/config.hpp"
#include "tipgan/param_file.hpp"
#include "tipgan/parallel.hpp"

namespace tipgan {

/// Ground-truth labeller for configurations. Implementations must be pure:
/// the same config always yields the same outcome.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual SimOutcome run(const Config& config) const = 0;
};

/// The box model run from the parameter set's template.
class BoxModelOracle final : public Oracle {
 public:
  explicit BoxModelOracle(ParamSet params = {}, IntegratorOptions options = {})
      : params_(std::move(params)), options_(options) {
    params_.params.validate();
  }

  SimOutcome run(const Config& config) const override {
    return run_config(config, params_.params, params_.init_template, options_);
  }

  const ParamSet& params() const { return params_; }
  const IntegratorOptions& options() const { return options_; }

 private:
  ParamSet params_;
  IntegratorOptions options_;
};

/// Memoizes another oracle on configs quantized to `quantum`.
class CachedOracle final : public Oracle {
 public:
  explicit CachedOracle(const Oracle& inner, double quantum = 1e-6) : inner_(inner), quantum_(quantum) {}

  SimOutcome run(const Config& config) const override {
    const Key key{q(config.d_low0), q(config.m_ek), q(config.fw_n)};
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) {
        ++hits_;
        return it->second;
      }
    }
    SimOutcome out = inner_.run(config);
    std::lock_guard lock(mutex_);
    ++misses_;
    cache_.emplace(key, out);
    return out;
  }

  std::size_t hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
  }
  std::size_t misses() const {
    std::lock_guard lock(mutex_);
    return misses_;
  }
  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
  }

 private:
  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  std::int64_t q(double v) const { return static_cast<std::int64_t>(std::llround(v / quantum_)); }

  const Oracle& inner_;
  double quantum_;
  mutable std::mutex mutex_;
  mutable std::map<Key, SimOutcome> cache_;
  mutable std::size_t hits_ = 0;
  mutable std::size_t misses_ = 0;
};

/// Evaluates every config, in order, using up to `jobs` threads.
inline std::vector<SimOutcome> run_all(const Oracle& oracle, std::span<const Config> configs,
                                       int jobs = 1) {
  std::vector<SimOutcome> out(configs.size());
  parallel_for(configs.size(), jobs, [&](std::size_t i) { out[i] = oracle.run(configs[i]); });
  return out;
}

}  // namespace tipgan
