#include "kooplab/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>

#include "kooplab/errors.hpp"
#include "kooplab/io_util.hpp"
#include "kooplab/rng.hpp"

namespace kooplab {

void DatasetSpec::validate() const {
    auto positive = [](double v, const char* field) {
        if (!(v > 0)) throw ConfigError(std::string("dataset.") + field + " must be positive");
    };
    positive(n_train, "n_train");
    positive(len_train, "len_train");
    positive(n_val, "n_val");
    positive(len_val, "len_val");
    positive(n_test, "n_test");
    positive(len_test, "len_test");
    positive(dt, "dt");
    if (init.x_lo >= init.x_hi || init.y_lo >= init.y_hi || init.z_lo >= init.z_hi)
        throw ConfigError("dataset.init box has empty extent");
    if (init.burn_in_time < 0) throw ConfigError("dataset.init.burn_in_time must be >= 0");
}

const std::vector<Trajectory>& Dataset::split(Split s) const {
    switch (s) {
        case Split::Train: return train;
        case Split::Val: return val;
        case Split::Test: return test;
    }
    throw ConfigError("bad split");
}

std::uint64_t trajectory_seed(std::uint64_t master_seed, Split split, int index) {
    std::uint64_t split_tag = static_cast<std::uint64_t>(split) + 1;
    return CounterRng::mix(CounterRng::mix(master_seed) ^
                           CounterRng::mix(split_tag * 0x517cc1b727220a95ULL +
                                           static_cast<std::uint64_t>(index)));
}

namespace {

Trajectory generate_one(std::uint64_t seed, Split split, int len, const DatasetSpec& spec) {
    CounterRng rng(seed, rng_stream::kTrajectoryInit);
    State3 s0{rng.uniform(spec.init.x_lo, spec.init.x_hi),
              rng.uniform(spec.init.y_lo, spec.init.y_hi),
              rng.uniform(spec.init.z_lo, spec.init.z_hi)};

    IntegratorConfig cfg = spec.integrator;
    cfg.dt_sample = spec.dt;
    try {
        if (spec.init.burn_in_time > 0)
            s0 = flow_map(s0, spec.init.burn_in_time, {0, 0, 0}, cfg, spec.lorenz);
        Trajectory t = integrate(s0, len, cfg, spec.lorenz);
        t.seed = seed;
        t.split = split;
        return t;
    } catch (const Error& e) {
        throw Error(e.code(), std::string(e.what()) + " (trajectory seed " + std::to_string(seed) + ")");
    }
}

void generate_split(std::vector<Trajectory>& out, Split split, int count, int len,
                    const DatasetSpec& spec, int threads) {
    out.resize(static_cast<std::size_t>(count));
    if (threads <= 1) {
        for (int i = 0; i < count; ++i)
            out[static_cast<std::size_t>(i)] =
                generate_one(trajectory_seed(spec.master_seed, split, i), split, len, spec);
        return;
    }
    // Each worker writes disjoint slots, so the result is thread-count invariant.
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex err_mu;
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (int i = w; i < count; i += threads)
                    out[static_cast<std::size_t>(i)] =
                        generate_one(trajectory_seed(spec.master_seed, split, i), split, len, spec);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

Dataset generate_splits(const DatasetSpec& spec, int threads) {
    spec.validate();
    Dataset ds;
    ds.spec = spec;
    generate_split(ds.train, Split::Train, spec.n_train, spec.len_train, spec, threads);
    generate_split(ds.val, Split::Val, spec.n_val, spec.len_val, spec, threads);
    generate_split(ds.test, Split::Test, spec.n_test, spec.len_test, spec, threads);
    return ds;
}

int window_count(int traj_steps, const WindowSpec& w) {
    if (w.length < 1 || w.stride < 1) throw ConfigError("window length/stride must be >= 1");
    if (w.length > traj_steps)
        throw WindowTooLongError("window length " + std::to_string(w.length) +
                                 " exceeds trajectory steps " + std::to_string(traj_steps));
    return (traj_steps - w.length) / w.stride + 1;
}

std::vector<Window> make_windows(const Trajectory& traj, const WindowSpec& w, int traj_id) {
    int count = window_count(traj.steps(), w);
    std::vector<Window> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back({traj_id, i * w.stride, w.length});
    return out;
}

Normalizer fit_normalizer(const std::vector<Trajectory>& train) {
    if (train.empty()) throw EmptyInputError("fit_normalizer: empty training split");
    double n = 0;
    State3 mean{}, m2{};
    for (const auto& t : train)
        for (const auto& s : t.states) {
            n += 1;
            for (int c = 0; c < 3; ++c) {
                double d = s[c] - mean[c];
                mean[c] += d / n;
                m2[c] += d * (s[c] - mean[c]);
            }
        }
    Normalizer norm;
    norm.mean = mean;
    for (int c = 0; c < 3; ++c) {
        double sd = std::sqrt(m2[c] / n);
        if (sd < 1e-12)
            throw DegenerateAxisError("fit_normalizer: axis " + std::to_string(c) +
                                      " has std " + std::to_string(sd));
        norm.std[c] = sd;
    }
    return norm;
}

State3 Normalizer::apply(const State3& s) const {
    if (!enabled) return s;
    return {(s.x - mean.x) / std.x, (s.y - mean.y) / std.y, (s.z - mean.z) / std.z};
}

State3 Normalizer::invert(const State3& s) const {
    if (!enabled) return s;
    return {s.x * std.x + mean.x, s.y * std.y + mean.y, s.z * std.z + mean.z};
}

Tensor Normalizer::apply(const Tensor& states) const {
    if (states.ndim() != 2 || states.cols() != 3)
        throw ShapeMismatchError("Normalizer::apply expects [N,3], got " + states.shape_str());
    Tensor out = states;
    for (int i = 0; i < out.rows(); ++i) {
        State3 s{out.at(i, 0), out.at(i, 1), out.at(i, 2)};
        s = apply(s);
        out.at(i, 0) = s.x;
        out.at(i, 1) = s.y;
        out.at(i, 2) = s.z;
    }
    return out;
}

// -- persistence -------------------------------------------------------------

void write_split_csv(const std::vector<Trajectory>& trajs, const std::filesystem::path& path) {
    std::string out = "traj_id,step,x,y,z\n";
    for (std::size_t id = 0; id < trajs.size(); ++id) {
        const auto& t = trajs[id];
        for (std::size_t k = 0; k < t.states.size(); ++k) {
            out += std::to_string(id);
            out += ',';
            out += std::to_string(k);
            out += ',';
            out += format_double(t.states[k].x);
            out += ',';
            out += format_double(t.states[k].y);
            out += ',';
            out += format_double(t.states[k].z);
            out += '\n';
        }
    }
    atomic_write(path, out);
}

std::vector<Trajectory> read_split_csv(const std::filesystem::path& path, Split split, double dt) {
    std::string content = read_file(path);
    std::istringstream in(content);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty split csv: " + path.string());
    std::vector<Trajectory> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        long traj_id, step;
        double x, y, z;
        if (std::sscanf(line.c_str(), "%ld,%ld,%lf,%lf,%lf", &traj_id, &step, &x, &y, &z) != 5)
            throw ConfigError("bad csv row in " + path.string() + ": " + line);
        if (traj_id == static_cast<long>(out.size())) {
            out.emplace_back();
            out.back().dt = dt;
            out.back().split = split;
        }
        out.back().states.push_back({x, y, z});
    }
    return out;
}

namespace {
constexpr char kTrajMagic[7] = "LZTRJ1";
}

void write_split_binary(const std::vector<Trajectory>& trajs, const std::filesystem::path& path) {
    std::string out(kTrajMagic, 6);
    put_u32(out, static_cast<std::uint32_t>(trajs.size()));
    for (const auto& t : trajs) {
        put_u32(out, static_cast<std::uint32_t>(t.states.size()));
        put_u64(out, t.seed);
        put_f64(out, t.dt);
        for (const auto& s : t.states) {
            put_f64(out, s.x);
            put_f64(out, s.y);
            put_f64(out, s.z);
        }
    }
    atomic_write(path, out);
}

std::vector<Trajectory> read_split_binary(const std::filesystem::path& path, Split split) {
    std::string in = read_file(path);
    if (in.size() < 10 || in.compare(0, 6, kTrajMagic, 6) != 0)
        throw ConfigError("not a trajectory cache: " + path.string());
    std::size_t pos = 6;
    std::uint32_t count = get_u32(in, pos);
    std::vector<Trajectory> out(count);
    for (auto& t : out) {
        std::uint32_t n_states = get_u32(in, pos);
        t.seed = get_u64(in, pos);
        t.dt = get_f64(in, pos);
        t.split = split;
        t.states.resize(n_states);
        for (auto& s : t.states) {
            s.x = get_f64(in, pos);
            s.y = get_f64(in, pos);
            s.z = get_f64(in, pos);
        }
    }
    return out;
}

void write_dataset(const Dataset& ds, const Normalizer& norm, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_split_csv(ds.train, dir / "train.csv");
    write_split_csv(ds.val, dir / "val.csv");
    write_split_csv(ds.test, dir / "test.csv");
    write_split_binary(ds.train, dir / "train.bin");
    write_split_binary(ds.val, dir / "val.bin");
    write_split_binary(ds.test, dir / "test.bin");

    std::string m;
    const DatasetSpec& s = ds.spec;
    m += "master_seed=" + std::to_string(s.master_seed) + "\n";
    m += "dt=" + format_double(s.dt) + "\n";
    m += "n_train=" + std::to_string(s.n_train) + "\n";
    m += "len_train=" + std::to_string(s.len_train) + "\n";
    m += "n_val=" + std::to_string(s.n_val) + "\n";
    m += "len_val=" + std::to_string(s.len_val) + "\n";
    m += "n_test=" + std::to_string(s.n_test) + "\n";
    m += "len_test=" + std::to_string(s.len_test) + "\n";
    m += "init_box=" + format_double(s.init.x_lo) + "," + format_double(s.init.x_hi) + "," +
         format_double(s.init.y_lo) + "," + format_double(s.init.y_hi) + "," +
         format_double(s.init.z_lo) + "," + format_double(s.init.z_hi) + "\n";
    m += "burn_in_time=" + format_double(s.init.burn_in_time) + "\n";
    m += "normalizer_mean=" + format_double(norm.mean.x) + "," + format_double(norm.mean.y) + "," +
         format_double(norm.mean.z) + "\n";
    m += "normalizer_std=" + format_double(norm.std.x) + "," + format_double(norm.std.y) + "," +
         format_double(norm.std.z) + "\n";
    m += "normalizer_enabled=" + std::string(norm.enabled ? "1" : "0") + "\n";
    for (const char* f : {"train.csv", "val.csv", "test.csv", "train.bin", "val.bin", "test.bin"})
        m += std::string("hash_") + f + "=" + hash_file(dir / f) + "\n";
    atomic_write(dir / "manifest.txt", m);
}

std::map<std::string, std::string> read_manifest_kv(const std::filesystem::path& path) {
    std::map<std::string, std::string> kv;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

Dataset read_dataset(const std::filesystem::path& dir) {
    auto kv = read_manifest_kv(dir / "manifest.txt");
    Dataset ds;
    ds.spec.master_seed = std::stoull(kv.at("master_seed"));
    ds.spec.dt = std::stod(kv.at("dt"));
    ds.spec.n_train = std::stoi(kv.at("n_train"));
    ds.spec.len_train = std::stoi(kv.at("len_train"));
    ds.spec.n_val = std::stoi(kv.at("n_val"));
    ds.spec.len_val = std::stoi(kv.at("len_val"));
    ds.spec.n_test = std::stoi(kv.at("n_test"));
    ds.spec.len_test = std::stoi(kv.at("len_test"));
    ds.train = read_split_binary(dir / "train.bin", Split::Train);
    ds.val = read_split_binary(dir / "val.bin", Split::Val);
    ds.test = read_split_binary(dir / "test.bin", Split::Test);
    for (auto* split : {&ds.train, &ds.val, &ds.test})
        for (auto& t : *split) t.dt = ds.spec.dt;
    return ds;
}

Normalizer read_normalizer(const std::filesystem::path& dir) {
    auto kv = read_manifest_kv(dir / "manifest.txt");
    Normalizer n;
    auto parse3 = [](const std::string& s, State3& out) {
        if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &out.x, &out.y, &out.z) != 3)
            throw ConfigError("bad manifest vector: " + s);
    };
    parse3(kv.at("normalizer_mean"), n.mean);
    parse3(kv.at("normalizer_std"), n.std);
    n.enabled = kv.at("normalizer_enabled") == "1";
    return n;
}

}  // namespace kooplab
