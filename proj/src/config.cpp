#include "vpb/config.hpp"

#include "vpb/io_util.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <charconv>
#include <chrono>
#include <climits>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace vpb {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
    const char* ws = " \t\r\n";
    const auto a = s.find_first_not_of(ws);
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

struct Cursor {
    const std::string& name;
    int line = 0;
    std::string section, key;

    [[noreturn]] void fail(const std::string& msg) const {
        std::string where = name + ":" + std::to_string(line) + ": ";
        if (!key.empty()) where += "[" + section + "] " + key + ": ";
        throw std::invalid_argument(where + msg);
    }
};

double real_value(const Cursor& at, const std::string& value) {
    double out = 0.0;
    const char* first = value.data();
    const char* last = first + value.size();
    const auto res = std::from_chars(first, last, out);
    if (res.ec != std::errc{} || res.ptr != last)
        at.fail("expected a real number, got '" + value + "'");
    return out;
}

long long_value(const Cursor& at, const std::string& value) {
    long out = 0;
    const char* first = value.data();
    const char* last = first + value.size();
    const auto res = std::from_chars(first, last, out);
    if (res.ec != std::errc{} || res.ptr != last)
        at.fail("expected an integer, got '" + value + "'");
    return out;
}

int int_value(const Cursor& at, const std::string& value) {
    const long v = long_value(at, value);
    if (v < INT_MIN || v > INT_MAX) at.fail("integer out of range: '" + value + "'");
    return static_cast<int>(v);
}

std::uint64_t u64_value(const Cursor& at, const std::string& value) {
    std::uint64_t out = 0;
    const char* first = value.data();
    const char* last = first + value.size();
    const auto res = std::from_chars(first, last, out);
    if (res.ec != std::errc{} || res.ptr != last)
        at.fail("expected a nonnegative integer, got '" + value + "'");
    return out;
}

bool bool_value(const Cursor& at, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    at.fail("expected true or false, got '" + value + "'");
}

std::vector<double> real_list(const Cursor& at, const std::string& value) {
    std::vector<double> out;
    for (const std::string& part : split(value, ',')) {
        const std::string item = trim(part);
        if (item.empty()) at.fail("empty entry in a comma list");
        out.push_back(real_value(at, item));
    }
    return out;
}

ModeList mode_list_value(const Cursor& at, const std::string& value) {
    if (value == "none") return {};
    ModeList out;
    for (const std::string& part : split(value, ',')) {
        const std::string item = trim(part);
        const std::vector<std::string> triple = split(item, ':');
        if (triple.size() != 3)
            at.fail("expected k:cos_amp:sin_amp triples (or 'none'), got '" + item + "'");
        FourierMode mode;
        mode.k = int_value(at, trim(triple[0]));
        if (mode.k < 1) at.fail("mode number must be at least 1, got " + std::to_string(mode.k));
        mode.cos_amp = real_value(at, trim(triple[1]));
        mode.sin_amp = real_value(at, trim(triple[2]));
        out.push_back(mode);
    }
    return out;
}

CollisionBackend backend_value(const Cursor& at, const std::string& value) {
    if (value == "bgk") return CollisionBackend::BGK;
    if (value == "boltzmann") return CollisionBackend::Boltzmann;
    at.fail("expected bgk or boltzmann, got '" + value + "'");
}

TimeScheme scheme_value(const Cursor& at, const std::string& value) {
    if (value == "euler") return TimeScheme::IMEXEuler;
    if (value == "ars222") return TimeScheme::IMEXARS222;
    at.fail("expected euler or ars222, got '" + value + "'");
}

const char* backend_name(CollisionBackend b) {
    return b == CollisionBackend::BGK ? "bgk" : "boltzmann";
}

const char* scheme_name(TimeScheme s) {
    return s == TimeScheme::IMEXEuler ? "euler" : "ars222";
}

void assign_key(RunConfig& cfg, const Cursor& at, const std::string& value) {
    const std::string& s = at.section;
    const std::string& k = at.key;
    if (s == "grid") {
        if (k == "x_modes") cfg.grid.x_modes = int_value(at, value);
        else if (k == "degree_cap") cfg.grid.degree_cap = int_value(at, value);
        else if (k == "quad_order") cfg.grid.quad_order = int_value(at, value);
        else at.fail("unknown key");
    } else if (s == "kernel") {
        if (k == "backend") cfg.kernel.backend = backend_value(at, value);
        else if (k == "relaxation_rate") cfg.kernel.relaxation_rate = real_value(at, value);
        else if (k == "gamma") cfg.kernel.spec.gamma = real_value(at, value);
        else if (k == "s") cfg.kernel.spec.s = real_value(at, value);
        else if (k == "c_phi") cfg.kernel.spec.C_phi = real_value(at, value);
        else if (k == "theta_min") cfg.kernel.spec.theta_min = real_value(at, value);
        else if (k == "quad_order") cfg.kernel.spec.quad_order = int_value(at, value);
        else if (k == "n_theta") cfg.kernel.spec.n_theta = int_value(at, value);
        else if (k == "n_phi") cfg.kernel.spec.n_phi = int_value(at, value);
        else at.fail("unknown key");
    } else if (s == "kinetic") {
        if (k == "eps") cfg.kinetic.eps = real_value(at, value);
        else if (k == "dt") cfg.kinetic.dt = real_value(at, value);
        else if (k == "t_end") cfg.kinetic.t_end = real_value(at, value);
        else if (k == "scheme") cfg.kinetic.scheme = scheme_value(at, value);
        else if (k == "cfl_safety") cfg.kinetic.cfl_safety = real_value(at, value);
        else if (k == "record_every") cfg.kinetic.record_every = int_value(at, value);
        else if (k == "quadratic") cfg.kinetic.quadratic = bool_value(at, value);
        else at.fail("unknown key");
    } else if (s == "fluid") {
        if (k == "dt") cfg.fluid.dt = real_value(at, value);
        else if (k == "t_end") cfg.fluid.t_end = real_value(at, value);
        else if (k == "record_every") cfg.fluid.record_every = int_value(at, value);
        else if (k == "blowup_limit") cfg.fluid.blowup_limit = real_value(at, value);
        else if (k == "nu") cfg.fluid.nu = real_value(at, value);
        else if (k == "kappa") cfg.fluid.kappa = real_value(at, value);
        else if (k == "sigma") cfg.fluid.sigma = real_value(at, value);
        else at.fail("unknown key");
    } else if (s == "initial") {
        if (k == "amplitude") cfg.initial.amplitude = real_value(at, value);
        else if (k == "rho") cfg.initial.rho = mode_list_value(at, value);
        else if (k == "u1") cfg.initial.u[0] = mode_list_value(at, value);
        else if (k == "u2") cfg.initial.u[1] = mode_list_value(at, value);
        else if (k == "u3") cfg.initial.u[2] = mode_list_value(at, value);
        else if (k == "theta") cfg.initial.theta = mode_list_value(at, value);
        else if (k == "n") cfg.initial.n = mode_list_value(at, value);
        else at.fail("unknown key");
    } else if (s == "sweep") {
        if (k == "eps_ladder") cfg.sweep.eps_ladder = real_list(at, value);
        else if (k == "t_end") cfg.sweep.t_end = real_value(at, value);
        else if (k == "record_dt") cfg.sweep.record_dt = real_value(at, value);
        else if (k == "fluid_dt") cfg.sweep.fluid_dt = real_value(at, value);
        else at.fail("unknown key");
    } else if (s == "energy") {
        if (k == "cap") cfg.energy.cap = int_value(at, value);
        else if (k == "l") cfg.energy.l = real_value(at, value);
        else if (k == "gamma") cfg.energy.gamma = real_value(at, value);
        else if (k == "s") cfg.energy.s = real_value(at, value);
        else if (k == "field_factor") cfg.energy.field_factor = bool_value(at, value);
        else at.fail("unknown key");
    } else if (s == "output") {
        if (k == "directory") cfg.output.directory = value;
        else if (k == "cache_directory") cfg.output.cache_directory = value;
        else if (k == "seed") cfg.output.seed = u64_value(at, value);
        else at.fail("unknown key");
    } else {
        at.fail("unknown section");
    }
}

bool known_section(const std::string& s) {
    static const std::set<std::string> names{"grid",    "kernel", "kinetic", "fluid",
                                            "initial", "sweep",  "energy",  "output"};
    return names.count(s) > 0;
}

void check_positive(const std::string& name, const std::string& field, double v) {
    if (!(std::isfinite(v) && v > 0.0))
        throw std::invalid_argument(name + ": " + field + ": must be positive and finite, got " +
                                    format_g17(v));
}

void finalize(RunConfig& cfg, const std::set<std::string>& seen, const std::string& name) {
    auto fail = [&](const std::string& msg) { throw std::invalid_argument(name + ": " + msg); };

    if (cfg.grid.degree_cap < 2) fail("[grid] degree_cap: must be at least 2");
    if (cfg.grid.quad_order < 0) fail("[grid] quad_order: must be nonnegative (0 selects the default)");

    std::unique_ptr<TorusGrid> grid;
    try {
        grid = std::make_unique<TorusGrid>(cfg.grid.x_modes);
    } catch (const std::exception& e) {
        fail(std::string("[grid] x_modes: ") + e.what());
    }
    std::unique_ptr<HermiteBasis> basis;
    try {
        basis = std::make_unique<HermiteBasis>(cfg.grid.degree_cap, cfg.grid.quad_order);
    } catch (const std::exception& e) {
        fail(std::string("[grid] ") + e.what());
    }

    check_positive(name, "[kernel] relaxation_rate", cfg.kernel.relaxation_rate);
    try {
        cfg.kernel.spec.validate();
    } catch (const std::exception& e) {
        fail(std::string("[kernel] ") + e.what());
    }

    check_positive(name, "[kinetic] eps", cfg.kinetic.eps);
    check_positive(name, "[kinetic] dt", cfg.kinetic.dt);
    check_positive(name, "[kinetic] t_end", cfg.kinetic.t_end);
    if (cfg.kinetic.record_every < 1) fail("[kinetic] record_every: must be at least 1");
    if (!(cfg.kinetic.cfl_safety > 0.0 && cfg.kinetic.cfl_safety <= 1.0))
        fail("[kinetic] cfl_safety: must lie in (0, 1]");
    const double cfl_bound =
        cfg.kinetic.cfl_safety * cfg.kinetic.eps * grid->dx() / basis->max_node_speed();
    if (cfg.kinetic.dt > cfl_bound * (1.0 + 1.0e-12))
        fail("[kinetic] dt: violates the advective CFL bound cfl_safety * eps * dx / v_max = " +
             format_g17(cfl_bound));

    check_positive(name, "[fluid] dt", cfg.fluid.dt);
    check_positive(name, "[fluid] t_end", cfg.fluid.t_end);
    if (cfg.fluid.record_every < 1) fail("[fluid] record_every: must be at least 1");
    check_positive(name, "[fluid] blowup_limit", cfg.fluid.blowup_limit);
    const int overrides = static_cast<int>(seen.count("fluid/nu")) +
                          static_cast<int>(seen.count("fluid/kappa")) +
                          static_cast<int>(seen.count("fluid/sigma"));
    if (overrides != 0 && overrides != 3)
        fail("[fluid] nu, kappa, sigma: override all three transport coefficients together or none");
    cfg.fluid.override_coefficients = overrides == 3;
    if (cfg.fluid.override_coefficients) {
        check_positive(name, "[fluid] nu", cfg.fluid.nu);
        check_positive(name, "[fluid] kappa", cfg.fluid.kappa);
        check_positive(name, "[fluid] sigma", cfg.fluid.sigma);
    }

    check_positive(name, "[initial] amplitude", cfg.initial.amplitude);

    if (cfg.sweep.eps_ladder.empty()) fail("[sweep] eps_ladder: must contain at least one epsilon");
    for (std::size_t i = 0; i < cfg.sweep.eps_ladder.size(); ++i) {
        const double e = cfg.sweep.eps_ladder[i];
        if (!(std::isfinite(e) && e > 0.0))
            fail("[sweep] eps_ladder: entry " + std::to_string(i) + " must be positive and finite");
        if (i > 0 && !(e < cfg.sweep.eps_ladder[i - 1]))
            fail("[sweep] eps_ladder: must be strictly decreasing (entry " + std::to_string(i) + ")");
    }
    check_positive(name, "[sweep] t_end", cfg.sweep.t_end);
    check_positive(name, "[sweep] record_dt", cfg.sweep.record_dt);
    check_positive(name, "[sweep] fluid_dt", cfg.sweep.fluid_dt);
    if (cfg.sweep.record_dt < cfg.sweep.fluid_dt)
        fail("[sweep] record_dt: must be at least fluid_dt");

    if (cfg.energy.cap < 0) fail("[energy] cap: must be nonnegative");
    if (2 * cfg.energy.cap > cfg.grid.degree_cap)
        fail("[energy] cap: velocity derivative budget 2 * cap exceeds [grid] degree_cap");
    if (!(std::isfinite(cfg.energy.l) && cfg.energy.l >= 0.0))
        fail("[energy] l: must be finite and nonnegative");
    if (!std::isfinite(cfg.energy.gamma)) fail("[energy] gamma: must be finite");
    if (!(cfg.energy.s > 0.0 && cfg.energy.s <= 1.0)) fail("[energy] s: must lie in (0, 1]");

    if (cfg.output.directory.empty()) fail("[output] directory: must not be empty");
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& name) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::string current_section;
    Cursor at{name, 0, "", ""};
    std::istringstream stream(text);
    std::string raw;
    while (std::getline(stream, raw)) {
        ++at.line;
        at.section.clear();
        at.key.clear();
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') at.fail("unterminated section heading '" + line + "'");
            const std::string section = trim(line.substr(1, line.size() - 2));
            if (!known_section(section)) at.fail("unknown section [" + section + "]");
            current_section = section;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            at.fail("expected 'key = value' or a [section] heading, got '" + line + "'");
        if (current_section.empty()) at.fail("key outside any section");
        at.section = current_section;
        at.key = trim(line.substr(0, eq));
        if (at.key.empty()) at.fail("missing key before '='");
        const std::string value = trim(line.substr(eq + 1));
        if (value.empty()) at.fail("missing value");
        const std::string id = at.section + "/" + at.key;
        if (!seen.insert(id).second) at.fail("duplicate key");
        assign_key(cfg, at, value);
    }
    finalize(cfg, seen, name);
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("config file not readable: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), fs::path(path).filename().string());
}

SweepConfig sweep_config(const RunConfig& cfg) {
    SweepConfig s;
    s.eps_ladder = cfg.sweep.eps_ladder;
    s.amplitude = cfg.initial.amplitude;
    s.t_end = cfg.sweep.t_end;
    s.backend = cfg.kernel.backend;
    s.degree_cap = cfg.grid.degree_cap;
    s.x_modes = cfg.grid.x_modes;
    s.cfl_safety = cfg.kinetic.cfl_safety;
    s.fluid_dt = cfg.sweep.fluid_dt;
    s.record_dt = cfg.sweep.record_dt;
    s.rho_modes = cfg.initial.rho;
    s.u_modes = cfg.initial.u;
    s.theta_modes = cfg.initial.theta;
    s.n_modes = cfg.initial.n;
    return s;
}

KineticConfig kinetic_config(const RunConfig& cfg) {
    KineticConfig k;
    k.eps = cfg.kinetic.eps;
    k.dt = cfg.kinetic.dt;
    k.t_end = cfg.kinetic.t_end;
    k.scheme = cfg.kinetic.scheme;
    k.collision_backend = cfg.kernel.backend;
    k.cfl_safety = cfg.kinetic.cfl_safety;
    k.record_every = cfg.kinetic.record_every;
    k.quadratic = cfg.kinetic.quadratic;
    return k;
}

FluidConfig fluid_config(const RunConfig& cfg) {
    FluidConfig f;
    f.dt = cfg.fluid.dt;
    f.t_end = cfg.fluid.t_end;
    f.record_every = cfg.fluid.record_every;
    f.blowup_limit = cfg.fluid.blowup_limit;
    return f;
}

EnergyOptions energy_options(const RunConfig& cfg, double eps) {
    EnergyOptions opt;
    opt.derivative_cap = cfg.energy.cap;
    opt.weight.l = cfg.energy.l;
    opt.weight.gamma = cfg.energy.gamma;
    opt.weight.s = cfg.energy.s;
    opt.weight.use_field_factor = cfg.energy.field_factor;
    opt.eps = eps;
    return opt;
}

namespace {

ordered_json modes_json(const ModeList& modes) {
    ordered_json out = ordered_json::array();
    for (const FourierMode& m : modes)
        out.push_back({{"k", m.k}, {"cos_amp", m.cos_amp}, {"sin_amp", m.sin_amp}});
    return out;
}

}  // namespace

std::string config_echo_json(const RunConfig& cfg) {
    ordered_json j;
    j["grid"] = {{"x_modes", cfg.grid.x_modes},
                 {"degree_cap", cfg.grid.degree_cap},
                 {"quad_order", cfg.grid.quad_order}};
    j["kernel"] = {{"backend", backend_name(cfg.kernel.backend)},
                   {"relaxation_rate", cfg.kernel.relaxation_rate},
                   {"gamma", cfg.kernel.spec.gamma},
                   {"s", cfg.kernel.spec.s},
                   {"c_phi", cfg.kernel.spec.C_phi},
                   {"theta_min", cfg.kernel.spec.theta_min},
                   {"quad_order", cfg.kernel.spec.quad_order},
                   {"n_theta", cfg.kernel.spec.n_theta},
                   {"n_phi", cfg.kernel.spec.n_phi}};
    j["kinetic"] = {{"eps", cfg.kinetic.eps},
                    {"dt", cfg.kinetic.dt},
                    {"t_end", cfg.kinetic.t_end},
                    {"scheme", scheme_name(cfg.kinetic.scheme)},
                    {"cfl_safety", cfg.kinetic.cfl_safety},
                    {"record_every", cfg.kinetic.record_every},
                    {"quadratic", cfg.kinetic.quadratic}};
    j["fluid"] = {{"dt", cfg.fluid.dt},
                  {"t_end", cfg.fluid.t_end},
                  {"record_every", cfg.fluid.record_every},
                  {"blowup_limit", cfg.fluid.blowup_limit},
                  {"override_coefficients", cfg.fluid.override_coefficients},
                  {"nu", cfg.fluid.nu},
                  {"kappa", cfg.fluid.kappa},
                  {"sigma", cfg.fluid.sigma}};
    j["initial"] = {{"amplitude", cfg.initial.amplitude},
                    {"rho", modes_json(cfg.initial.rho)},
                    {"u1", modes_json(cfg.initial.u[0])},
                    {"u2", modes_json(cfg.initial.u[1])},
                    {"u3", modes_json(cfg.initial.u[2])},
                    {"theta", modes_json(cfg.initial.theta)},
                    {"n", modes_json(cfg.initial.n)}};
    j["sweep"] = {{"eps_ladder", cfg.sweep.eps_ladder},
                  {"t_end", cfg.sweep.t_end},
                  {"record_dt", cfg.sweep.record_dt},
                  {"fluid_dt", cfg.sweep.fluid_dt}};
    j["energy"] = {{"cap", cfg.energy.cap},
                   {"l", cfg.energy.l},
                   {"gamma", cfg.energy.gamma},
                   {"s", cfg.energy.s},
                   {"field_factor", cfg.energy.field_factor}};
    j["output"] = {{"directory", cfg.output.directory},
                   {"cache_directory", cfg.output.cache_directory},
                   {"seed", cfg.output.seed}};
    return j.dump();
}

std::string collision_cache_name(const KernelSpec& spec, int degree_cap) {
    ByteSink sink;
    sink.put_u32(static_cast<std::uint32_t>(degree_cap));
    sink.put_f64(spec.gamma);
    sink.put_f64(spec.s);
    sink.put_f64(spec.C_phi);
    sink.put_f64(spec.theta_min);
    sink.put_u32(static_cast<std::uint32_t>(spec.quad_order));
    sink.put_u32(static_cast<std::uint32_t>(spec.n_theta));
    sink.put_u32(static_cast<std::uint32_t>(spec.n_phi));
    const auto digest = sha256_bytes(sink.bytes.data(), sink.bytes.size());
    return "boltzmann_K" + std::to_string(degree_cap) + "_" + hex_digest(digest).substr(0, 16) +
           ".vpbt";
}

OperatorSource resolve_operator(const RunConfig& cfg, const std::string& cache_dir,
                                bool assemble_forbidden) {
    OperatorSource src;
    HermiteBasis basis(cfg.grid.degree_cap, cfg.grid.quad_order);
    if (cfg.kernel.backend == CollisionBackend::BGK) {
        src.op = bgk_operator(basis, cfg.kernel.relaxation_rate);
        return src;
    }
    const KernelSpec& spec = cfg.kernel.spec;
    const fs::path dir = cache_dir.empty() ? fs::path(".") : fs::path(cache_dir);
    src.cache_path = (dir / collision_cache_name(spec, cfg.grid.degree_cap)).string();
    if (fs::exists(src.cache_path)) {
        src.op = cache_load(basis, src.cache_path);
        // The cache persists the kernel physics; the quadrature knobs are
        // distinguished by the file name alone.
        const KernelSpec& got = src.op.kernel;
        if (src.op.backend != CollisionBackend::Boltzmann || got.gamma != spec.gamma ||
            got.s != spec.s || got.C_phi != spec.C_phi || got.theta_min != spec.theta_min)
            throw std::runtime_error("collision cache at '" + src.cache_path +
                                     "' holds an operator assembled with different parameters");
        src.from_cache = true;
        return src;
    }
    if (assemble_forbidden)
        throw std::invalid_argument("collision cache missing at '" + src.cache_path +
                                    "' and assembly is forbidden; run precompute first");
    src.op = assemble_boltzmann(basis, spec);
    try {
        fs::create_directories(dir);
        cache_store(src.op, src.cache_path);
        src.stored = true;
    } catch (const std::exception&) {
        src.stored = false;
    }
    return src;
}

TrajectoryTable trajectory_table(const KineticTrajectory& traj) {
    if (traj.moments.size() != traj.snapshots.size())
        throw std::invalid_argument("trajectory moments and snapshots are misaligned");
    TrajectoryTable t;
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
        t.times.push_back(traj.snapshots[k].t);
        t.moments.push_back(traj.moments[k]);
        t.phi.push_back(traj.snapshots[k].phi);
    }
    return t;
}

TrajectoryTable trajectory_table(const TorusGrid& grid, const FluidTrajectory& traj,
                                 const FluidCoefficients& co) {
    TrajectoryTable t;
    for (const FluidState& s : traj.snapshots) {
        const OhmCurrent oc = ohm_current(grid, s, co);
        FluidMoments m;
        m.rho = s.rho();
        m.theta = s.theta;
        m.n = s.n;
        m.omega = oc.omega;
        m.u = s.u;
        m.j = oc.j;
        t.times.push_back(s.t);
        t.moments.push_back(std::move(m));
        t.phi.push_back(grid.poisson_solve(s.n).phi);
    }
    return t;
}

namespace {

void write_text(const std::string& path, const std::string& text) {
    write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace

void write_trajectory_csv(const std::string& path, const TrajectoryTable& table) {
    if (table.moments.size() != table.times.size() || table.phi.size() != table.times.size())
        throw std::invalid_argument("trajectory table columns are misaligned");
    std::string out = std::string(kTrajectoryCsvHeader) + "\n";
    for (std::size_t k = 0; k < table.times.size(); ++k) {
        const FluidMoments& m = table.moments[k];
        const Eigen::VectorXd& phi = table.phi[k];
        const std::string t = format_g17(table.times[k]);
        for (int i = 0; i < m.rho.size(); ++i) {
            out += t;
            out += ',';
            out += std::to_string(i);
            for (const double v : {m.rho[i], m.u(0, i), m.u(1, i), m.u(2, i), m.theta[i], m.n[i],
                                   m.j(0, i), m.j(1, i), m.j(2, i), m.omega[i], phi[i]}) {
                out += ',';
                out += format_g17(v);
            }
            out += '\n';
        }
    }
    write_text(path, out);
}

void write_energy_csv(const std::string& path, const EnergyReport& report) {
    std::string out = std::string(kEnergyCsvHeader) + "\n";
    for (const EnergyRow& r : report.rows) {
        bool first = true;
        for (const double v : {r.t, r.e_n, r.d_low, r.d_high, r.e_weighted, r.micro_norm,
                               r.boussinesq_dev, r.incompressibility_dev, r.ohm_residual,
                               r.charge_residual, r.mass_drift}) {
            if (!first) out += ',';
            out += format_g17(v);
            first = false;
        }
        out += '\n';
    }
    write_text(path, out);
}

KineticTrajectory lift_fluid_trajectory(const MomentEngine& eng, const TorusGrid& grid,
                                        const FluidTrajectory& traj,
                                        const FluidCoefficients& co) {
    const HermiteBasis& basis = eng.basis();
    const Eigen::VectorXd heat_vec = 0.5 * (basis.vec_vsq() - 3.0 * basis.vec_one());
    KineticTrajectory out;
    out.steps = traj.steps;
    for (const FluidState& s : traj.snapshots) {
        TwoSpeciesDistribution f = well_prepared_initial(eng, grid, s.rho(), s.u, s.theta, s.n);
        const OhmCurrent oc = ohm_current(grid, s, co);
        for (int i = 0; i < grid.size(); ++i) {
            Eigen::VectorXd micro = oc.omega[i] * 0.5 * heat_vec;
            for (int a = 0; a < 3; ++a) micro += 0.5 * oc.j(a, i) * basis.vec_v(a);
            f.plus.col(i) += micro;
            f.minus.col(i) -= micro;
        }
        const PoissonSolution ps = grid.poisson_solve(s.n);
        KineticState state;
        state.t = s.t;
        state.f = std::move(f);
        state.phi = ps.phi;
        state.grad_phi = ps.grad_phi;
        out.snapshots.push_back(std::move(state));
        FluidMoments m;
        m.rho = s.rho();
        m.theta = s.theta;
        m.n = s.n;
        m.omega = oc.omega;
        m.u = s.u;
        m.j = oc.j;
        out.moments.push_back(std::move(m));
    }
    return out;
}

namespace {

struct CliCommon {
    std::string config_path, output_dir, cache_dir;
    bool assemble_forbidden = false;
};

RunConfig effective_config(const CliCommon& c) {
    RunConfig cfg = c.config_path.empty() ? RunConfig{} : parse_config(c.config_path);
    if (!c.output_dir.empty()) cfg.output.directory = c.output_dir;
    return cfg;
}

std::string effective_cache_dir(const CliCommon& c, const RunConfig& cfg) {
    if (!c.cache_dir.empty()) return c.cache_dir;
    if (const char* env = std::getenv("VPB_CACHE_DIR"); env != nullptr && *env != '\0') return env;
    return cfg.output.cache_directory;
}

struct FieldSet {
    Eigen::VectorXd rho, theta, n;
    Eigen::MatrixXd u;
};

FieldSet initial_fields(const TorusGrid& grid, const InitialSection& init) {
    FieldSet f;
    f.rho = synthesize_field(grid, init.rho, init.amplitude);
    f.theta = synthesize_field(grid, init.theta, init.amplitude);
    f.n = synthesize_field(grid, init.n, init.amplitude);
    f.u.resize(3, grid.size());
    for (int a = 0; a < 3; ++a)
        f.u.row(a) = synthesize_field(grid, init.u[a], init.amplitude).transpose();
    return f;
}

std::string eps_tag(double eps) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", eps);
    return buf;
}

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg,
                    const OperatorSource* src,
                    const std::vector<std::pair<std::string, fs::path>>& files,
                    double wall_seconds) {
    ordered_json m;
    m["command"] = command;
    m["config"] = ordered_json::parse(config_echo_json(cfg));
    m["seed"] = cfg.output.seed;
    m["versions"] = {{"vpbflow", "0.1.0"},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                   std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__}};
    if (src != nullptr && !src->cache_path.empty()) {
        m["cache"] = {{"path", src->cache_path},
                      {"digest", hex_digest(src->op.provenance)},
                      {"from_cache", src->from_cache}};
    } else {
        m["cache"] = nullptr;
    }
    ordered_json entries = ordered_json::object();
    for (const auto& [label, path] : files) {
        const std::vector<std::uint8_t> bytes = read_file_bytes(path.string());
        entries[label] = {{"sha256", hex_digest(sha256_bytes(bytes.data(), bytes.size()))},
                         {"bytes", bytes.size()}};
    }
    m["files"] = entries;
    m["wall_time_seconds"] = wall_seconds;
    write_text((dir / "manifest.json").string(), m.dump(2) + "\n");
}

int cmd_precompute(const CliCommon& c, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig cfg = effective_config(c);
    if (cfg.kernel.backend != CollisionBackend::Boltzmann)
        throw std::invalid_argument(
            "[kernel] backend: precompute applies to the assembled backend only; the relaxation "
            "operator is built inline and never cached");
    HermiteBasis basis(cfg.grid.degree_cap, cfg.grid.quad_order);
    const CollisionOperator op = assemble_boltzmann(basis, cfg.kernel.spec);
    const std::string dir = effective_cache_dir(c, cfg);
    const fs::path base = dir.empty() ? fs::path(".") : fs::path(dir);
    fs::create_directories(base);
    const fs::path path = base / collision_cache_name(cfg.kernel.spec, cfg.grid.degree_cap);
    cache_store(op, path.string());
    out << "cache " << path.string() << "\n";
    out << "digest " << hex_digest(op.provenance) << "\n";
    out << "assembled in " << format_g17(elapsed_seconds(t0)) << " s\n";
    return 0;
}

int cmd_run_kinetic(const CliCommon& c, std::ostream& out, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig cfg = effective_config(c);
    const OperatorSource src = resolve_operator(cfg, effective_cache_dir(c, cfg),
                                                c.assemble_forbidden);
    if (!src.cache_path.empty() && !src.from_cache && !src.stored)
        err << "warning: could not store the assembled operator at " << src.cache_path << "\n";
    HermiteBasis basis(cfg.grid.degree_cap, cfg.grid.quad_order);
    MomentEngine eng(basis);
    TorusGrid grid(cfg.grid.x_modes);
    const FieldSet init = initial_fields(grid, cfg.initial);
    const TwoSpeciesDistribution f0 =
        well_prepared_initial(eng, grid, init.rho, init.u, init.theta, init.n);
    KineticSolver solver(eng, grid, src.op, kinetic_config(cfg));
    const KineticTrajectory traj = solver.run(f0);
    EnergyOptions eopt = energy_options(cfg, cfg.kinetic.eps);
    eopt.sigma = transport_coefficients(src.op, eng).sigma_macro;
    const EnergyReport report = energy_report(eng, grid, traj, eopt);

    const fs::path dir(cfg.output.directory);
    fs::create_directories(dir);
    write_trajectory_csv((dir / "trajectory.csv").string(), trajectory_table(traj));
    write_energy_csv((dir / "energy.csv").string(), report);
    write_manifest(dir, "run-kinetic", cfg, &src,
                   {{"trajectory.csv", dir / "trajectory.csv"}, {"energy.csv", dir / "energy.csv"}},
                   elapsed_seconds(t0));
    out << "run-kinetic: " << traj.steps << " steps, " << traj.snapshots.size()
        << " snapshots, dissipation lambda " << format_g17(report.lambda_fit) << "\n";
    out << "wrote " << (dir / "trajectory.csv").string() << ", " << (dir / "energy.csv").string()
        << ", " << (dir / "manifest.json").string() << "\n";
    return 0;
}

int cmd_run_fluid(const CliCommon& c, std::ostream& out, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig cfg = effective_config(c);
    HermiteBasis basis(cfg.grid.degree_cap, cfg.grid.quad_order);
    MomentEngine eng(basis);
    TorusGrid grid(cfg.grid.x_modes);

    FluidCoefficients co{cfg.fluid.nu, cfg.fluid.kappa, cfg.fluid.sigma};
    OperatorSource src;
    bool used_operator = false;
    if (!cfg.fluid.override_coefficients) {
        src = resolve_operator(cfg, effective_cache_dir(c, cfg), c.assemble_forbidden);
        if (!src.cache_path.empty() && !src.from_cache && !src.stored)
            err << "warning: could not store the assembled operator at " << src.cache_path << "\n";
        co = FluidCoefficients::from_transport(transport_coefficients(src.op, eng));
        used_operator = true;
    }

    const FieldSet init = initial_fields(grid, cfg.initial);
    const FluidState state0 = prepared_fluid_state(grid, init.rho, init.u, init.theta, init.n);
    FluidSolver solver(grid, co, fluid_config(cfg));
    const FluidTrajectory traj = solver.run(state0);

    const KineticTrajectory lifted = lift_fluid_trajectory(eng, grid, traj, co);
    EnergyOptions eopt = energy_options(cfg, 1.0);
    eopt.sigma = co.sigma;
    const EnergyReport report = energy_report(eng, grid, lifted, eopt);

    const fs::path dir(cfg.output.directory);
    fs::create_directories(dir);
    write_trajectory_csv((dir / "trajectory.csv").string(), trajectory_table(grid, traj, co));
    write_energy_csv((dir / "energy.csv").string(), report);
    write_manifest(dir, "run-fluid", cfg, used_operator ? &src : nullptr,
                   {{"trajectory.csv", dir / "trajectory.csv"}, {"energy.csv", dir / "energy.csv"}},
                   elapsed_seconds(t0));
    out << "run-fluid: " << traj.steps << " steps, " << traj.snapshots.size()
        << " snapshots, coefficients nu " << format_g17(co.nu) << " kappa " << format_g17(co.kappa)
        << " sigma " << format_g17(co.sigma) << "\n";
    out << "wrote " << (dir / "trajectory.csv").string() << ", " << (dir / "energy.csv").string()
        << ", " << (dir / "manifest.json").string() << "\n";
    return 0;
}

int cmd_limit_sweep(const CliCommon& c, std::ostream& out, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig cfg = effective_config(c);
    const OperatorSource src = resolve_operator(cfg, effective_cache_dir(c, cfg),
                                                c.assemble_forbidden);
    if (!src.cache_path.empty() && !src.from_cache && !src.stored)
        err << "warning: could not store the assembled operator at " << src.cache_path << "\n";
    HermiteBasis basis(cfg.grid.degree_cap, cfg.grid.quad_order);
    MomentEngine eng(basis);
    TorusGrid grid(cfg.grid.x_modes);
    const FluidCoefficients co = FluidCoefficients::from_transport(transport_coefficients(src.op, eng));

    SweepArtifacts art;
    const ConvergenceResult res = run_sweep(sweep_config(cfg), src.op, &art);

    const fs::path dir(cfg.output.directory);
    fs::create_directories(dir);
    std::vector<std::pair<std::string, fs::path>> files;
    write_trajectory_csv((dir / "fluid_trajectory.csv").string(),
                         trajectory_table(grid, art.fluid, co));
    files.emplace_back("fluid_trajectory.csv", dir / "fluid_trajectory.csv");
    for (std::size_t j = 0; j < res.eps_ladder.size(); ++j) {
        const std::string tag = eps_tag(res.eps_ladder[j]);
        const std::string traj_name = "trajectory_eps" + tag + ".csv";
        const std::string energy_name = "energy_eps" + tag + ".csv";
        write_trajectory_csv((dir / traj_name).string(), trajectory_table(art.kinetic[j]));
        EnergyOptions eopt = energy_options(cfg, res.eps_ladder[j]);
        eopt.sigma = co.sigma;
        write_energy_csv((dir / energy_name).string(),
                         energy_report(eng, grid, art.kinetic[j], eopt));
        files.emplace_back(traj_name, dir / traj_name);
        files.emplace_back(energy_name, dir / energy_name);
    }

    ordered_json r;
    r["eps_ladder"] = res.eps_ladder;
    ordered_json errors = ordered_json::object();
    ordered_json fit = ordered_json::object();
    for (std::size_t m = 0; m < ConvergenceResult::moment_names.size(); ++m) {
        const char* name = ConvergenceResult::moment_names[m];
        std::vector<double> row(res.sup_errors.cols());
        for (Eigen::Index k = 0; k < res.sup_errors.cols(); ++k)
            row[static_cast<std::size_t>(k)] = res.sup_errors(static_cast<Eigen::Index>(m), k);
        errors[name] = row;
        fit[name] = {{"slope", res.slopes[static_cast<Eigen::Index>(m)]},
                     {"intercept", res.intercepts[static_cast<Eigen::Index>(m)]},
                     {"r_squared", res.r_squared[static_cast<Eigen::Index>(m)]},
                     {"defined", res.slope_defined[m]}};
    }
    r["sup_errors"] = errors;
    r["fit"] = fit;
    r["boussinesq"] = {{"at_end", res.boussinesq_at_end}, {"constant", res.boussinesq_constant}};
    r["div_u"] = {{"at_end", res.div_u_at_end}, {"constant", res.div_u_constant}};
    write_text((dir / "result.json").string(), r.dump(2) + "\n");
    files.emplace_back("result.json", dir / "result.json");

    write_manifest(dir, "limit-sweep", cfg, &src, files, elapsed_seconds(t0));
    out << "limit-sweep:";
    for (std::size_t m = 0; m < ConvergenceResult::moment_names.size(); ++m) {
        out << " " << ConvergenceResult::moment_names[m] << "=";
        if (res.slope_defined[m])
            out << format_g17(res.slopes[static_cast<Eigen::Index>(m)]);
        else
            out << "undefined";
    }
    out << "\n";
    out << "wrote " << (dir / "result.json").string() << " and " << files.size() - 1
        << " data files\n";
    return 0;
}

int cmd_selftest(const CliCommon& c, bool skip_assembled, std::ostream& out) {
    const RunConfig cfg = effective_config(c);
    SelftestOptions opts;
    opts.cache_dir = effective_cache_dir(c, cfg);
    opts.include_boltzmann = !skip_assembled;
    if (cfg.output.seed != 0) opts.seed = static_cast<unsigned>(cfg.output.seed);
    const SelftestReport report = selftest(opts);

    ordered_json items = ordered_json::array();
    int failures = 0;
    for (const SelftestItem& item : report.items) {
        if (!item.pass) ++failures;
        out << (item.pass ? "PASS " : "FAIL ") << item.name
            << "  measured=" << format_g17(item.measured) << " bound=" << format_g17(item.bound);
        if (!item.note.empty()) out << "  " << item.note;
        out << "\n";
        items.push_back({{"name", item.name},
                         {"pass", item.pass},
                         {"measured", item.measured},
                         {"bound", item.bound},
                         {"note", item.note}});
    }
    const fs::path dir(cfg.output.directory);
    fs::create_directories(dir);
    ordered_json j;
    j["all_pass"] = report.all_pass();
    j["items"] = items;
    write_text((dir / "selftest.json").string(), j.dump(2) + "\n");
    if (failures == 0)
        out << "selftest: all " << report.items.size() << " checks passed\n";
    else
        out << "selftest: " << failures << " of " << report.items.size() << " checks failed\n";
    return report.all_pass() ? 0 : 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{
        "Kinetic and fluid solvers for the scaled two-species plasma torus: relaxation or "
        "assembled collision operators, diffusive-limit sweeps, and energy diagnostics"};
    app.name("vpb");

    CliCommon c;
    bool skip_assembled = false;
    auto add_common = [&](CLI::App* sub, bool with_forbidden) {
        sub->add_option("--config", c.config_path,
                        "run configuration file (built-in defaults when omitted)");
        sub->add_option("--output-dir", c.output_dir, "overrides [output] directory");
        sub->add_option("--cache-dir", c.cache_dir,
                        "operator cache directory (overrides VPB_CACHE_DIR and [output] "
                        "cache_directory)");
        if (with_forbidden)
            sub->add_flag("--assemble-forbidden", c.assemble_forbidden,
                          "fail instead of assembling when the operator cache is missing");
    };
    CLI::App* pre = app.add_subcommand(
        "precompute", "assemble the collision operator and store it in the cache");
    add_common(pre, false);
    CLI::App* kin = app.add_subcommand("run-kinetic", "integrate the scaled kinetic system");
    add_common(kin, true);
    CLI::App* flu = app.add_subcommand("run-fluid", "integrate the limiting incompressible system");
    add_common(flu, true);
    CLI::App* sweep = app.add_subcommand(
        "limit-sweep", "kinetic-versus-fluid convergence study over an epsilon ladder");
    add_common(sweep, true);
    CLI::App* self = app.add_subcommand("selftest", "run the built-in property suite");
    add_common(self, false);
    self->add_flag("--skip-assembled", skip_assembled,
                   "omit the assembled-backend items (no kernel assembly)");
    app.require_subcommand(1);

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (pre->parsed()) return cmd_precompute(c, out);
        if (kin->parsed()) return cmd_run_kinetic(c, out, err);
        if (flu->parsed()) return cmd_run_fluid(c, out, err);
        if (sweep->parsed()) return cmd_limit_sweep(c, out, err);
        if (self->parsed()) return cmd_selftest(c, skip_assembled, out);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "abort: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace vpb
