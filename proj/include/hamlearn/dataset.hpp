#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hamlearn/rng.hpp"
#include "hamlearn/systems.hpp"

namespace hamlearn::training {

struct DatasetProvenance {
    std::string system_id;
    std::string integrator_id = "dopri54";
    double rtol = 1e-10;
    double atol = 1e-12;
    std::uint64_t seed = 0;
    double eps = 0.0;
    std::uint64_t noise_seed = 0;
    bool noise_projected = false;
};

/// N trajectories, M equispaced points each, step dt. The provenance block
/// fully determines regeneration: the same seed gives a bit-identical dataset.
struct TrajectoryDataset {
    int N = 0, M = 0;
    double dt = 0.0;
    int qdim = 0; // configuration dimension n
    int k = 0;    // > 0 tags a (T*S^2)^k dataset
    DatasetProvenance prov;
    std::vector<double> states; // N * M * 2*qdim

    int state_dim() const { return 2 * qdim; }
    std::span<const double> state(int i, int j) const {
        return {states.data() + (static_cast<size_t>(i) * M + j) * state_dim(),
                static_cast<size_t>(state_dim())};
    }
    std::span<double> state(int i, int j) {
        return {states.data() + (static_cast<size_t>(i) * M + j) * state_dim(),
                static_cast<size_t>(state_dim())};
    }
    /// All M states of trajectory i, flattened.
    std::span<const double> trajectory(int i) const {
        return {states.data() + static_cast<size_t>(i) * M * state_dim(),
                static_cast<size_t>(M) * state_dim()};
    }
};

using Sampler = std::function<std::vector<double>(Rng&)>;

/// Targets come from the Dormand-Prince reference integrator at times (j-1)dt.
TrajectoryDataset generate_dataset(const systems::System& sys, const Sampler& sampler, int n_traj,
                                   int m_points, double dt, double rtol, double atol,
                                   std::uint64_t seed);

/// Convenience overload using the system's documented default sampler.
TrajectoryDataset generate_dataset(const systems::System& sys, int n_traj, int m_points,
                                   double dt, double rtol, double atol, std::uint64_t seed);

/// y_i^j += eps * delta with delta ~ N(0,1) i.i.d. per coordinate, initial
/// conditions untouched. With `project` set, chain states are pushed back onto
/// (T*S^2)^k afterwards (off by default; raw noise).
TrajectoryDataset add_noise(const TrajectoryDataset& ds, double eps, std::uint64_t seed,
                            bool project = false);

double max_constraint_violation(const TrajectoryDataset& ds);

void save_dataset_csv(const TrajectoryDataset& ds, const std::string& path,
                      const std::string& extra_header = "");
TrajectoryDataset load_dataset_csv(const std::string& path);

} // namespace hamlearn::training
