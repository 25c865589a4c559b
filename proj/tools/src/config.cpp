#include "gqme_cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "gqme/errors.hpp"

namespace gqme::cli {

using nlohmann::json;

namespace {

// Reads the fields of one JSON object and rejects anything it did not consume.
class Fields {
public:
    Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path))
    {
        if (!obj_.is_object()) throw ValidationError("config: '" + label() + "' must be an object");
    }

    template <class T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        const auto it = obj_.find(key);
        if (it == obj_.end()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception& e) {
            throw ValidationError("config: field '" + name(key) + "' has the wrong type (" + e.what() + ")");
        }
    }

    const json* child(const char* key)
    {
        seen_.insert(key);
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const
    {
        for (const auto& item : obj_.items())
            if (!seen_.count(item.key())) throw ValidationError("config: unknown field '" + name(item.key().c_str()) + "'");
    }

private:
    std::string label() const { return path_.empty() ? "<root>" : path_; }

    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_system(Fields& f, SystemSpec& sys)
{
    f.get("epsilon", sys.epsilon);
    f.get("omega", sys.omega);
}

void read_bath(Fields& f, SpectralDensity& sd)
{
    f.get("xi", sd.xi);
    f.get("s", sd.s);
    f.get("omega_c", sd.omega_c);
    f.get("beta", sd.beta);
}

} // namespace

json load_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        // nlohmann reports "line L, column C" in the message.
        throw ValidationError("config " + path.string() + ": " + e.what());
    }
}

SimulateConfig parse_simulate_config(const json& doc)
{
    SimulateConfig cfg;
    Fields root(doc, "");
    root.get("engine", cfg.engine);
    root.get("dt", cfg.dt);
    root.get("steps", cfg.steps);
    root.get("seed", cfg.seed);
    root.get("output", cfg.output);
    if (const json* s = root.child("system")) {
        Fields f(*s, "system");
        read_system(f, cfg.system);
        f.finish();
    }
    if (const json* b = root.child("bath")) {
        Fields f(*b, "bath");
        read_bath(f, cfg.bath);
        f.finish();
    }
    if (const json* h = root.child("heom")) {
        Fields f(*h, "heom");
        f.get("n_exp", cfg.heom.n_exp);
        f.get("fit_horizon", cfg.heom.fit_horizon);
        f.get("depth", cfg.heom.depth);
        f.get("step", cfg.heom.step);
        f.get("max_ados", cfg.heom.max_ados);
        f.get("depth_check", cfg.heom.depth_check);
        f.get("bath_file", cfg.heom.bath_file);
        f.get("write_bath", cfg.heom.write_bath);
        if (const json* pm = f.child("per_mode")) {
            Fields g(*pm, "heom.per_mode");
            PerModeDepth d;
            g.get("l_max", d.l_max);
            g.get("l_min", d.l_min);
            g.finish();
            cfg.heom.per_mode = d;
        }
        f.finish();
    }
    if (const json* e = root.child("exact_diag")) {
        Fields f(*e, "exact_diag");
        f.get("n_modes", cfg.exact_diag.n_modes);
        f.get("fock_cutoff", cfg.exact_diag.fock_cutoff);
        f.get("thermal_fock", cfg.exact_diag.thermal_fock);
        f.get("max_dimension", cfg.exact_diag.max_dimension);
        f.finish();
    }
    root.finish();
    return cfg;
}

SweepConfig parse_sweep_config(const json& doc)
{
    SweepConfig cfg;
    Fields root(doc, "");
    root.get("mode", cfg.mode);
    root.get("reference", cfg.reference);
    root.get("dynamics_reference", cfg.dynamics_reference);
    root.get("dts", cfg.dts);
    root.get("schemes", cfg.schemes);
    root.get("t_mem", cfg.t_mem);
    root.get("t_end", cfg.t_end);
    root.get("rho0", cfg.rho0);
    root.get("mpdi_normalization", cfg.mpdi_normalization);
    root.get("seed", cfg.seed);
    root.get("output_dir", cfg.output_dir);
    root.get("report", cfg.report);
    root.finish();
    return cfg;
}

json to_json(const SimulateConfig& cfg)
{
    json j{{"engine", cfg.engine},
           {"dt", cfg.dt},
           {"steps", cfg.steps},
           {"seed", cfg.seed},
           {"system", {{"epsilon", cfg.system.epsilon}, {"omega", cfg.system.omega}}},
           {"bath", {{"xi", cfg.bath.xi}, {"s", cfg.bath.s}, {"omega_c", cfg.bath.omega_c}, {"beta", cfg.bath.beta}}}};
    if (cfg.engine == "heom") {
        j["heom"] = {{"n_exp", cfg.heom.n_exp}, {"fit_horizon", cfg.heom.fit_horizon}, {"depth", cfg.heom.depth},
                     {"step", cfg.heom.step}, {"max_ados", cfg.heom.max_ados}};
        if (cfg.heom.per_mode) j["heom"]["per_mode"] = {{"l_max", cfg.heom.per_mode->l_max}, {"l_min", cfg.heom.per_mode->l_min}};
        if (!cfg.heom.bath_file.empty()) j["heom"]["bath_file"] = cfg.heom.bath_file;
    }
    if (cfg.engine == "exact-diag")
        j["exact_diag"] = {{"n_modes", cfg.exact_diag.n_modes},
                           {"fock_cutoff", cfg.exact_diag.fock_cutoff},
                           {"thermal_fock", cfg.exact_diag.thermal_fock},
                           {"max_dimension", cfg.exact_diag.max_dimension}};
    return j;
}

void validate(const SimulateConfig& cfg)
{
    static const std::set<std::string> engines{"heom", "exact-diag", "pure-dephasing", "closed"};
    if (!engines.count(cfg.engine))
        throw ValidationError("config: field 'engine' must be one of heom, exact-diag, pure-dephasing, closed (got '" +
                              cfg.engine + "')");
    if (!(cfg.dt > 0.0)) throw ValidationError("config: field 'dt' must be positive");
    if (cfg.steps < 1) throw ValidationError("config: field 'steps' must be at least 1");
    if (cfg.output.empty()) throw ValidationError("config: no output file given (field 'output' or -o)");
    if (cfg.engine != "closed") cfg.bath.validate();
    if (cfg.engine == "pure-dephasing" && cfg.system.omega != 0.0)
        throw ValidationError("config: engine 'pure-dephasing' is exact only for omega = 0 (got omega = " +
                              std::to_string(cfg.system.omega) + "); use heom or exact-diag");
    if (cfg.engine == "heom") {
        if (cfg.heom.n_exp < 1 && cfg.heom.bath_file.empty()) throw ValidationError("config: field 'heom.n_exp' must be >= 1");
        if (!(cfg.heom.fit_horizon > 0.0)) throw ValidationError("config: field 'heom.fit_horizon' must be positive");
        if (cfg.heom.depth < 1) throw ValidationError("config: field 'heom.depth' must be >= 1");
        if (cfg.heom.step < 0.0) throw ValidationError("config: field 'heom.step' must be >= 0");
    }
    if (cfg.engine == "exact-diag" && cfg.exact_diag.fock_cutoff < 1)
        throw ValidationError("config: field 'exact_diag.fock_cutoff' must be >= 1");
}

void validate(const SweepConfig& cfg)
{
    static const std::set<std::string> modes{"kernel", "dynamics", "manufactured"};
    if (!modes.count(cfg.mode))
        throw ValidationError("config: field 'mode' must be one of kernel, dynamics, manufactured (got '" + cfg.mode + "')");
    if (cfg.dts.size() < 2) throw ValidationError("sweep needs at least 2 dt values (got " + std::to_string(cfg.dts.size()) + ")");
    for (double dt : cfg.dts)
        if (!(dt > 0.0)) throw ValidationError("config: every entry of 'dts' must be positive");
    if (cfg.mode != "manufactured" && cfg.reference.empty())
        throw ValidationError("config: mode '" + cfg.mode + "' needs field 'reference' (fine trajectory file)");
    if (cfg.mode == "dynamics" && cfg.dynamics_reference.empty())
        throw ValidationError("config: mode 'dynamics' needs field 'dynamics_reference'");
    if (!(cfg.t_mem > 0.0)) throw ValidationError("config: field 't_mem' must be positive");
    if (cfg.mpdi_normalization != "literal" && cfg.mpdi_normalization != "endpoint")
        throw ValidationError("config: field 'mpdi_normalization' must be literal or endpoint");
}

} // namespace gqme::cli
