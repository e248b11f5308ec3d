#include "multilevel/engine.hpp"

#include <atomic>
#include <cmath>
#include <string>
#include <thread>
#include <utility>

#include "multilevel/errors.hpp"

namespace multilevel::engine {

namespace {

struct ChunkAcc {
    double sum = 0.0;
    double sum_sq = 0.0;
    double cost = 0.0;
    std::int64_t n = 0;
};

struct Task {
    int level_index = 0;       // 0-based
    std::int64_t first = 0;    // first draw index
    std::int64_t last = 0;     // one past the last draw index
    std::size_t slot = 0;      // destination accumulator
};

struct Failure {
    std::size_t task = SIZE_MAX;
    std::string message;
};

// Runs tasks over an atomic queue; the lowest-index failure wins so error
// reporting does not depend on scheduling.
template <typename Fn>
void run_tasks(std::size_t n_tasks, int workers, Fn&& body) {
    if (workers <= 1 || n_tasks <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    const int n_threads = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(workers), n_tasks));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n_tasks) return;
                body(i);
            }
        });
    for (auto& th : pool) th.join();
}

}  // namespace

EstimatorResult run(const calibration::MultilevelPlan& plan, const LevelSampler& sampler,
                    std::uint64_t seed, int workers) {
    const int R = plan.R;
    std::vector<LevelRequest> requests(static_cast<std::size_t>(R));
    for (int j = 0; j < R; ++j) {
        requests[j].level = j + 1;
        requests[j].n_coarse = j == 0 ? 0 : plan.refiners[j - 1];
        requests[j].n_fine = plan.refiners[j];
        requests[j].h = plan.h;
    }

    // Fixed chunk decomposition, independent of the worker count.
    std::vector<Task> tasks;
    std::vector<std::size_t> level_first_slot(static_cast<std::size_t>(R) + 1);
    for (int j = 0; j < R; ++j) {
        level_first_slot[j] = tasks.size();
        const std::int64_t nj = plan.level_sizes[j];
        for (std::int64_t first = 0; first < nj; first += kChunkDraws)
            tasks.push_back({j, first, std::min(nj, first + kChunkDraws), tasks.size()});
    }
    level_first_slot[R] = tasks.size();

    std::vector<ChunkAcc> accs(tasks.size());
    std::vector<Failure> failures(tasks.size());
    std::atomic<bool> failed{false};

    run_tasks(tasks.size(), workers, [&](std::size_t i) {
        const Task& task = tasks[i];
        const LevelRequest& req = requests[task.level_index];
        ChunkAcc acc;
        try {
            for (std::int64_t k = task.first; k < task.last; ++k) {
                RngStream stream(seed, static_cast<std::uint32_t>(req.level),
                                 static_cast<std::uint64_t>(k));
                const LevelSample s = sampler.sample(req, stream);
                const double inc = req.level == 1 ? s.fine : s.fine - s.coarse.value();
                if (!std::isfinite(inc)) {
                    failures[i] = {i, "non-finite sample at level " + std::to_string(req.level) +
                                          ", draw " + std::to_string(k)};
                    failed.store(true);
                    return;
                }
                acc.sum += inc;
                acc.sum_sq += inc * inc;
                acc.cost += s.cost_units > 0.0
                                ? s.cost_units
                                : static_cast<double>(req.n_coarse + req.n_fine);
                ++acc.n;
            }
        } catch (const std::exception& e) {
            failures[i] = {i, "sampler failed at level " + std::to_string(req.level) +
                                  " (draws " + std::to_string(task.first) + ".." +
                                  std::to_string(task.last - 1) + "): " + e.what()};
            failed.store(true);
            return;
        }
        accs[i] = acc;
    });

    if (failed.load()) {
        for (const auto& f : failures)
            if (f.task != SIZE_MAX) throw NumericalError(f.message);
    }

    EstimatorResult out;
    out.seed = seed;
    out.plan = plan;
    out.per_level.resize(static_cast<std::size_t>(R));
    out.estimate = 0.0;
    out.total_cost_units = 0.0;
    for (int j = 0; j < R; ++j) {
        double sum = 0.0, sum_sq = 0.0, cost = 0.0;
        std::int64_t n = 0;
        for (std::size_t s = level_first_slot[j]; s < level_first_slot[j + 1]; ++s) {
            sum += accs[s].sum;
            sum_sq += accs[s].sum_sq;
            cost += accs[s].cost;
            n += accs[s].n;
        }
        LevelStats& ls = out.per_level[static_cast<std::size_t>(j)];
        ls.count = n;
        ls.mean = sum / static_cast<double>(n);
        ls.variance =
            n > 1 ? std::max(0.0, (sum_sq - sum * sum / static_cast<double>(n)) /
                                      static_cast<double>(n - 1))
                  : 0.0;
        ls.cost_units = cost;
        out.estimate += plan.weights.W[static_cast<std::size_t>(j)] * ls.mean;
        out.total_cost_units += cost;
    }
    return out;
}

ReplicationStudy run_replicated(const calibration::MultilevelPlan& plan,
                                const LevelSampler& sampler, std::uint64_t master_seed,
                                int replications, int workers) {
    if (replications < 1) throw std::invalid_argument("run_replicated: replications must be >= 1");
    ReplicationStudy study;
    study.plan = plan;
    study.master_seed = master_seed;
    study.runs.resize(static_cast<std::size_t>(replications));

    if (replications == 1) {
        study.runs[0] = run(plan, sampler, master_seed, workers);
        return study;
    }

    std::vector<std::string> errors(static_cast<std::size_t>(replications));
    std::atomic<bool> failed{false};
    run_tasks(static_cast<std::size_t>(replications), workers, [&](std::size_t r) {
        try {
            study.runs[r] = run(plan, sampler, master_seed + static_cast<std::uint64_t>(r), 1);
        } catch (const std::exception& e) {
            errors[r] = "replication " + std::to_string(r) + ": " + e.what();
            failed.store(true);
        }
    });
    if (failed.load()) {
        for (const auto& e : errors)
            if (!e.empty()) throw NumericalError(e);
    }
    return study;
}

double measured_cost(const EstimatorResult& result) {
    double units = 0.0;
    for (const auto& ls : result.per_level) units += ls.cost_units;
    return units / result.plan.h;
}

}  // namespace multilevel::engine
