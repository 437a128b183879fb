// Copyright 2026 The Rhyme Authors
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

#include "rhyme/trace/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "rhyme/util/config.hpp"
#include "rhyme/util/error.hpp"

namespace rhyme::trace {
namespace {

enum Stream : std::uint64_t { kGlobal = 1, kLength = 2, kCanonical = 3, kDivergence = 4, kReward = 5 };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, std::uint64_t a = 0,
                         std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

// Two-state copy/mutate process with geometric run lengths whose long-run
// copy fraction is `keep`.
class BurstProcess {
 public:
  BurstProcess(double keep, double burst_mean, std::mt19937_64& rng) : rng_(rng) {
    if (keep >= 1.0) {
      end_copy_ = 0.0;
      copying_ = true;
    } else if (keep <= 0.0) {
      end_copy_ = 1.0;
      end_mutate_ = 0.0;
      copying_ = false;
    } else {
      end_mutate_ = 1.0 / burst_mean;
      end_copy_ = std::min(1.0, (1.0 - keep) / (keep * burst_mean));
      copying_ = unit_(rng_) < keep;
    }
  }

  bool next() {
    const bool out = copying_;
    const double u = unit_(rng_);
    if (copying_ ? u < end_copy_ : u < end_mutate_) copying_ = !copying_;
    return out;
  }

 private:
  std::mt19937_64& rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  double end_copy_ = 0.0;
  double end_mutate_ = 1.0;
  bool copying_ = true;
};

}  // namespace

TraceSpec TraceSpec::from_config(const Config& cfg) {
  TraceSpec s;
  s.num_prompts = static_cast<int>(cfg.get_int("trace.num_prompts"));
  s.group_size = static_cast<int>(cfg.get_int("trace.group_size"));
  s.epochs = static_cast<int>(cfg.get_int("trace.epochs"));
  s.vocab_size = static_cast<int>(cfg.get_int("trace.vocab_size"));
  s.len_mu = cfg.get_double("trace.len_mu");
  s.len_sigma = cfg.get_double("trace.len_sigma");
  s.len_min = cfg.get_int("trace.len_min");
  s.len_max = cfg.get_int("trace.len_max");
  s.group_corr = cfg.get_double("trace.group_corr");
  s.similarity = cfg.get_double("trace.similarity");
  s.similarity_step = cfg.get_double("trace.similarity_step");
  s.burst_mean = cfg.get_double("trace.burst_mean");
  s.group_divergence = cfg.get_double("trace.group_divergence");
  s.growth_mu = cfg.get_double("trace.growth_mu");
  s.growth_sigma = cfg.get_double("trace.growth_sigma");
  s.rank_noise = cfg.get_double("trace.rank_noise");
  s.high_reward_frac = cfg.get_double("trace.high_reward_frac");
  s.with_tokens = cfg.get_bool("trace.with_tokens");
  s.seed = static_cast<std::uint64_t>(cfg.get_int("trace.seed"));
  s.validate();
  return s;
}

void TraceSpec::validate() const {
  const auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (num_prompts < 1) throw ConfigError("trace.num_prompts must be >= 1");
  if (group_size < 1) throw ConfigError("trace.group_size must be >= 1");
  if (epochs < 1) throw ConfigError("trace.epochs must be >= 1");
  if (vocab_size < 2) throw ConfigError("trace.vocab_size must be >= 2");
  if (!(len_sigma >= 0.0) || !std::isfinite(len_mu)) {
    throw ConfigError("trace.len_mu/len_sigma: invalid log-normal parameters");
  }
  if (len_min < 1 || len_max < len_min) throw ConfigError("trace.len_min/len_max: need 1 <= min <= max");
  if (!in_unit(group_corr)) throw ConfigError("trace.group_corr must be in [0,1]");
  if (!in_unit(similarity)) throw ConfigError("trace.similarity must be in [0,1]");
  if (!(burst_mean >= 1.0)) throw ConfigError("trace.burst_mean must be >= 1");
  if (!(group_divergence >= 0.0 && group_divergence < 1.0)) {
    throw ConfigError("trace.group_divergence must be in [0,1)");
  }
  if (!(growth_sigma >= 0.0) || !std::isfinite(growth_mu)) {
    throw ConfigError("trace.growth_mu/growth_sigma: invalid growth distribution");
  }
  if (!in_unit(rank_noise)) throw ConfigError("trace.rank_noise must be in [0,1]");
  if (!in_unit(high_reward_frac)) throw ConfigError("trace.high_reward_frac must be in [0,1]");
}

double TraceSpec::similarity_at(int epoch) const {
  return std::clamp(similarity + similarity_step * (epoch - 1), 0.0, 1.0);
}

Trace generate(const TraceSpec& spec) {
  spec.validate();
  const auto epochs = static_cast<std::size_t>(spec.epochs);

  std::vector<double> mu(epochs, spec.len_mu);
  {
    auto rng = make_rng(spec.seed, kGlobal);
    std::normal_distribution<double> growth(spec.growth_mu, spec.growth_sigma);
    for (std::size_t e = 1; e < epochs; ++e) mu[e] = mu[e - 1] + growth(rng);
  }
  const double shared_sigma = spec.len_sigma * std::sqrt(spec.group_corr);
  const double own_sigma = spec.len_sigma * std::sqrt(1.0 - spec.group_corr);

  const double innovation = std::sqrt(1.0 - spec.rank_noise * spec.rank_noise);
  std::vector<std::vector<Response>> per_epoch(epochs);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<TokenId> token(0, spec.vocab_size - 1);

  for (int p = 0; p < spec.num_prompts; ++p) {
    char id[16];
    std::snprintf(id, sizeof(id), "p%05d", p);
    const auto pid = static_cast<std::uint64_t>(p);
    auto len_rng = make_rng(spec.seed, kLength, pid);
    auto tok_rng = make_rng(spec.seed, kCanonical, pid);
    auto reward_rng = make_rng(spec.seed, kReward, pid);
    std::normal_distribution<double> normal(0.0, 1.0);

    const auto slots = static_cast<std::size_t>(spec.group_size);
    double z = normal(len_rng);
    std::vector<double> own(slots);
    for (auto& o : own) o = normal(len_rng);
    std::vector<TokenId> canonical;
    for (std::size_t e = 0; e < epochs; ++e) {
      if (e > 0) {
        const double fz = normal(len_rng);
        if (unit(len_rng) >= spec.rank_noise) z = fz;
        for (auto& o : own) o = spec.rank_noise * o + innovation * normal(len_rng);
      }
      std::vector<std::int64_t> lengths(slots);
      for (std::size_t k = 0; k < slots; ++k) {
        auto& len = lengths[k];
        const double raw = std::exp(mu[e] + shared_sigma * z + own_sigma * own[k]);
        len = std::clamp(static_cast<std::int64_t>(std::llround(std::min(raw, 1e15))), spec.len_min,
                         spec.len_max);
      }

      if (spec.with_tokens) {
        const auto need = static_cast<std::size_t>(*std::max_element(lengths.begin(), lengths.end()));
        if (e > 0) {
          BurstProcess copy(spec.similarity_at(static_cast<int>(e)), spec.burst_mean, tok_rng);
          for (auto& t : canonical) {
            const TokenId fresh = token(tok_rng);
            if (!copy.next()) t = fresh;
          }
        }
        while (canonical.size() < need) canonical.push_back(token(tok_rng));
      }

      for (int slot = 0; slot < spec.group_size; ++slot) {
        Response r;
        r.prompt_id = id;
        r.epoch = static_cast<std::int64_t>(e) + 1;
        r.length = lengths[static_cast<std::size_t>(slot)];
        if (spec.with_tokens) {
          // Divergence pattern depends only on (prompt, slot), so it repeats
          // every epoch.
          auto div_rng = make_rng(spec.seed, kDivergence, pid, static_cast<std::uint64_t>(slot));
          BurstProcess keep(1.0 - spec.group_divergence, spec.burst_mean, div_rng);
          r.tokens.resize(static_cast<std::size_t>(r.length));
          for (std::size_t i = 0; i < r.tokens.size(); ++i) {
            const TokenId fresh = token(div_rng);
            r.tokens[i] = keep.next() ? canonical[i] : fresh;
          }
        }
        const bool high = unit(reward_rng) < spec.high_reward_frac;
        const double u = unit(reward_rng);
        r.reward = high ? 0.5 + 0.5 * u : 0.5 * u;
        per_epoch[e].push_back(std::move(r));
      }
    }
  }

  std::vector<Response> all;
  for (auto& bucket : per_epoch) {
    for (auto& r : bucket) all.push_back(std::move(r));
  }
  return Trace(std::move(all));
}

}  // namespace rhyme::trace
