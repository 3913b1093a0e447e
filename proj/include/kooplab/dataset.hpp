#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kooplab/lorenz.hpp"
#include "kooplab/tensor.hpp"

namespace kooplab {

// Axis-aligned box the initial conditions are drawn from; trajectories are
// burned in before recording so they start on or near the attractor.
struct InitSampler {
    double x_lo = -20.0, x_hi = 20.0;
    double y_lo = -25.0, y_hi = 25.0;
    double z_lo = 5.0, z_hi = 45.0;
    double burn_in_time = 10.0;
};

struct DatasetSpec {
    int n_train = 2048;
    int len_train = 256;
    int n_val = 64;
    int len_val = 1024;
    int n_test = 256;
    int len_test = 1024;
    double dt = 0.01;
    InitSampler init;
    std::uint64_t master_seed = 42;
    IntegratorConfig integrator;
    LorenzParams lorenz;

    void validate() const;
};

struct Dataset {
    DatasetSpec spec;
    std::vector<Trajectory> train;
    std::vector<Trajectory> val;
    std::vector<Trajectory> test;

    const std::vector<Trajectory>& split(Split s) const;
};

// Per-trajectory seeds derive from (master_seed, split, index) through the
// counter-based generator, so splits are reproducible and pairwise disjoint.
std::uint64_t trajectory_seed(std::uint64_t master_seed, Split split, int index);

Dataset generate_splits(const DatasetSpec& spec, int threads = 1);

struct WindowSpec {
    int length = 64;
    int stride = 16;
};

struct Window {
    int traj_id = 0;
    int start = 0;  // offset of the first input state
    int length = 0;

    // Input states cover [start, start+length); targets are shifted one step.
};

int window_count(int traj_steps, const WindowSpec& w);
std::vector<Window> make_windows(const Trajectory& traj, const WindowSpec& w, int traj_id);

struct Normalizer {
    State3 mean{};
    State3 std{1.0, 1.0, 1.0};
    bool enabled = true;

    State3 apply(const State3& s) const;
    State3 invert(const State3& s) const;
    // [N,3] convenience used when staging model inputs.
    Tensor apply(const Tensor& states) const;
};

Normalizer fit_normalizer(const std::vector<Trajectory>& train);

// -- persistence -------------------------------------------------------------

// CSV is the ground-truth format (columns traj_id, step, x, y, z); the binary
// cache (magic "LZTRJ1") exists purely as a faster load path.
void write_split_csv(const std::vector<Trajectory>& trajs, const std::filesystem::path& path);
std::vector<Trajectory> read_split_csv(const std::filesystem::path& path, Split split, double dt);

void write_split_binary(const std::vector<Trajectory>& trajs, const std::filesystem::path& path);
std::vector<Trajectory> read_split_binary(const std::filesystem::path& path, Split split);

void write_dataset(const Dataset& ds, const Normalizer& norm, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);
Normalizer read_normalizer(const std::filesystem::path& dir);

std::map<std::string, std::string> read_manifest_kv(const std::filesystem::path& path);

}  // namespace kooplab
