#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "multilevel/calibration.hpp"
#include "multilevel/rng.hpp"

namespace multilevel::engine {

/// One coupled draw at a level: a fine value, the coarse value produced from
/// the same randomness (absent at level 1), and the simulation cost consumed
/// in the accounting convention n_{j-1} + n_j per draw.
struct LevelSample {
    double fine = 0.0;
    std::optional<double> coarse;
    double cost_units = 0.0;
};

/// What the engine asks a sampler for: level j with refiners n_{j-1}, n_j
/// (n_coarse = 0 at level 1) at the plan's bias parameter h.
struct LevelRequest {
    int level = 1;
    std::int64_t n_coarse = 0;
    std::int64_t n_fine = 1;
    double h = 1.0;
};

/// A biased-simulation family the estimator can draw coupled levels from.
///
/// Contract:
///  - fine and coarse values of one sample share the underlying randomness
///    (same Brownian increments / same inner draws),
///  - all randomness is taken from the provided stream, in a fixed order, so
///    a sample is a pure function of (request, stream address),
///  - implementations must be safe to call concurrently with distinct streams.
class LevelSampler {
  public:
    virtual ~LevelSampler() = default;
    virtual LevelSample sample(const LevelRequest& req, RngStream& stream) const = 0;
};

/// Per-level increment statistics of one run.
struct LevelStats {
    std::int64_t count = 0;
    double mean = 0.0;       ///< mean of (fine - coarse), or of fine at level 1
    double variance = 0.0;   ///< unbiased sample variance of the increment
    double cost_units = 0.0; ///< total cost units consumed at this level
};

struct EstimatorResult {
    double estimate = 0.0;   ///< sum_j W_j * (level-j increment mean)
    std::vector<LevelStats> per_level;
    double total_cost_units = 0.0;
    std::uint64_t seed = 0;
    calibration::MultilevelPlan plan;
};

/// K independent runs of one plan under one master seed.
struct ReplicationStudy {
    calibration::MultilevelPlan plan;
    std::uint64_t master_seed = 0;
    std::optional<double> oracle;  ///< true value, when known
    std::vector<EstimatorResult> runs;
};

/// Draws are accumulated per level in fixed-size chunks merged in ascending
/// chunk order, so results are bit-identical for any worker count.
constexpr std::int64_t kChunkDraws = 8192;

/// Execute a plan. Streams are addressed (seed, level, draw); accumulation
/// is chunk-deterministic. A non-finite sample aborts with level/draw
/// context. `workers` <= 1 runs single-threaded.
EstimatorResult run(const calibration::MultilevelPlan& plan, const LevelSampler& sampler,
                    std::uint64_t seed, int workers = 1);

/// K independent runs; replication r uses seed master_seed + r (wrapping),
/// so a 1-replication study coincides with run(plan, sampler, master_seed).
/// Replications may execute concurrently; results are ordered by index.
ReplicationStudy run_replicated(const calibration::MultilevelPlan& plan,
                                const LevelSampler& sampler, std::uint64_t master_seed,
                                int replications, int workers = 1);

/// Measured cost sum_j (level cost units)/h; equals theoretical_cost(plan)
/// up to ceiling effects when samplers use the default cost convention.
double measured_cost(const EstimatorResult& result);

}  // namespace multilevel::engine
