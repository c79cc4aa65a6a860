#include "gfmlab/config.hpp"

#include <json.hpp>
#include <set>

#include "gfmlab/errors.hpp"
#include "gfmlab/textio.hpp"

namespace gfmlab {

namespace {

using nlohmann::json;

json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
}

// Strict accessor over one JSON object: every read marks its key, finish()
// rejects anything left over.
class Obj {
public:
    Obj(const json& j, std::string path, const std::string& origin)
        : j_(&j), path_(std::move(path)), origin_(origin) {
        if (!j.is_object()) throw ConfigError(origin_ + ": " + path_ + " must be an object");
    }

    bool has(const char* key) const { return j_->contains(key); }

    double num(const char* key) {
        require(key);
        return as_num(key);
    }
    double num(const char* key, double def) {
        if (!has(key)) return def;
        return as_num(key);
    }
    long long integer(const char* key, long long def) {
        if (!has(key)) return def;
        mark(key);
        const json& v = (*j_)[key];
        if (!v.is_number_integer()) {
            throw ConfigError(origin_ + ": " + path_ + "/" + key + " must be an integer");
        }
        return v.get<long long>();
    }
    bool boolean(const char* key, bool def) {
        if (!has(key)) return def;
        mark(key);
        const json& v = (*j_)[key];
        if (!v.is_boolean()) {
            throw ConfigError(origin_ + ": " + path_ + "/" + key + " must be a boolean");
        }
        return v.get<bool>();
    }
    std::string str(const char* key) {
        require(key);
        mark(key);
        const json& v = (*j_)[key];
        if (!v.is_string()) {
            throw ConfigError(origin_ + ": " + path_ + "/" + key + " must be a string");
        }
        return v.get<std::string>();
    }
    std::string str(const char* key, const std::string& def) {
        if (!has(key)) return def;
        return str(key);
    }

    Obj child(const char* key) {
        require(key);
        mark(key);
        return Obj{(*j_)[key], path_ + "/" + key, origin_};
    }
    std::optional<Obj> child_opt(const char* key) {
        if (!has(key)) return std::nullopt;
        mark(key);
        return Obj{(*j_)[key], path_ + "/" + key, origin_};
    }

    const json& array(const char* key) {
        require(key);
        mark(key);
        const json& v = (*j_)[key];
        if (!v.is_array()) {
            throw ConfigError(origin_ + ": " + path_ + "/" + key + " must be an array");
        }
        return v;
    }
    const json* array_opt(const char* key) {
        if (!has(key)) return nullptr;
        mark(key);
        const json& v = (*j_)[key];
        if (!v.is_array()) {
            throw ConfigError(origin_ + ": " + path_ + "/" + key + " must be an array");
        }
        return &v;
    }

    void finish() {
        for (auto it = j_->begin(); it != j_->end(); ++it) {
            if (!used_.count(it.key())) {
                throw ConfigError(origin_ + ": unknown key '" + path_ + "/" + it.key() + "'");
            }
        }
    }

    const std::string& path() const { return path_; }
    const std::string& origin() const { return origin_; }

private:
    void require(const char* key) const {
        if (!has(key)) {
            throw ConfigError(origin_ + ": missing required key '" + path_ + "/" + key + "'");
        }
    }
    void mark(const char* key) { used_.insert(key); }
    double as_num(const char* key) {
        mark(key);
        const json& v = (*j_)[key];
        if (!v.is_number()) {
            throw ConfigError(origin_ + ": " + path_ + "/" + key + " must be a number");
        }
        return v.get<double>();
    }

    const json* j_;
    std::string path_;
    std::string origin_;
    std::set<std::string> used_;
};

DroopParams parse_droop(Obj o) {
    DroopParams p;
    p.kp = o.num("kp", p.kp);
    p.kq = o.num("kq", p.kq);
    p.omega_nom = o.num("omega_nom", p.omega_nom);
    p.v_nom = o.num("v_nom", p.v_nom);
    p.p_ref = o.num("p_ref", p.p_ref);
    p.q_ref = o.num("q_ref", p.q_ref);
    p.tau_filter = o.num("tau_filter", p.tau_filter);
    o.finish();
    return p;
}

VsmParams parse_vsm(Obj o) {
    VsmParams p;
    p.h_inertia = o.num("h_inertia", p.h_inertia);
    p.d_damp = o.num("d_damp", p.d_damp);
    p.p_mech = o.num("p_mech", p.p_mech);
    p.omega_nom = o.num("omega_nom", p.omega_nom);
    p.nq_slope = o.num("nq_slope", p.nq_slope);
    p.tq_exc = o.num("tq_exc", p.tq_exc);
    p.v_nom = o.num("v_nom", p.v_nom);
    o.finish();
    return p;
}

PslParams parse_psl(Obj o) {
    PslParams p;
    p.k_pll_p = o.num("k_pll_p", p.k_pll_p);
    p.k_pll_i = o.num("k_pll_i", p.k_pll_i);
    p.omega_nom = o.num("omega_nom", p.omega_nom);
    p.p_ref = o.num("p_ref", p.p_ref);
    p.kv_prop = o.num("kv_prop", p.kv_prop);
    p.v_nom = o.num("v_nom", p.v_nom);
    o.finish();
    return p;
}

VocParams parse_voc(Obj o) {
    VocParams p;
    p.sigma = o.num("sigma", p.sigma);
    p.cap = o.num("cap", p.cap);
    p.k_i = o.num("k_i", p.k_i);
    p.k_v = o.num("k_v", p.k_v);
    p.alpha_cubic = o.num("alpha_cubic", p.alpha_cubic);
    p.omega_nom = o.num("omega_nom", p.omega_nom);
    o.finish();
    return p;
}

SecondaryParams parse_secondary(Obj o) {
    SecondaryParams p;
    p.ki_sec = o.num("ki_sec", p.ki_sec);
    p.eta_mode = static_cast<int>(o.integer("eta_mode", p.eta_mode));
    p.k_i_q = o.num("k_i_q", p.k_i_q);
    p.delta_omega = o.num("delta_omega", p.delta_omega);
    p.delta_e = o.num("delta_e", p.delta_e);
    o.finish();
    return p;
}

BlendWeights parse_weights(Obj o) {
    BlendWeights w;
    w.alpha = o.num("alpha");
    w.beta = o.num("beta");
    w.gamma = o.num("gamma");
    w.nu = o.num("nu");
    o.finish();
    return w;
}

ControlLaw parse_law(const std::string& name, const std::string& where,
                     const std::string& origin) {
    if (name == "droop") return ControlLaw::droop;
    if (name == "psl") return ControlLaw::psl;
    if (name == "vsm") return ControlLaw::vsm;
    if (name == "vsm_damped") return ControlLaw::vsm_damped;
    if (name == "voc") return ControlLaw::voc;
    if (name == "blend") return ControlLaw::blend;
    throw ConfigError(origin + ": " + where + ": unknown law '" + name + "'");
}

EventKind parse_event_kind(const std::string& name, const std::string& where,
                           const std::string& origin) {
    if (name == "load_surge") return EventKind::load_surge;
    if (name == "load_drop") return EventKind::load_drop;
    if (name == "overload") return EventKind::overload;
    if (name == "generation_outage") return EventKind::generation_outage;
    if (name == "fault") return EventKind::fault;
    if (name == "islanding") return EventKind::islanding;
    if (name == "reconnection") return EventKind::reconnection;
    throw ConfigError(origin + ": " + where + ": unknown event kind '" + name + "'");
}

GridParams parse_grid(Obj o) {
    GridParams g;
    g.e_th = o.num("e_th", g.e_th);
    g.r_th = o.num("r_th", g.r_th);
    g.x_th = o.num("x_th", g.x_th);
    g.omega_grid = o.num("omega", g.omega_grid);
    g.phase0 = o.num("phase0", g.phase0);
    g.connected = o.boolean("connected", g.connected);
    o.finish();
    return g;
}

ScenarioSpec parse_scenario(Obj o, const std::string& origin) {
    ScenarioSpec s;
    s.name = o.str("name", "scenario");
    s.t_end = o.num("t_end");
    s.dt = o.num("dt", s.dt);
    s.load_r = o.num("load_r");
    s.seed = o.integer("seed", 0);
    if (const json* events = o.array_opt("events")) {
        int idx = 0;
        for (const auto& je : *events) {
            Obj eo{je, o.path() + "/events/" + std::to_string(idx), origin};
            Event ev;
            ev.t = eo.num("t");
            ev.kind = parse_event_kind(eo.str("kind"), eo.path(), origin);
            ev.magnitude = eo.num("magnitude", 0.0);
            ev.duration = eo.num("duration", ev.kind == EventKind::fault ? 0.1 : 0.0);
            eo.finish();
            s.events.push_back(ev);
            ++idx;
        }
    }
    o.finish();
    return s;
}

PlantMeta parse_plant(std::optional<Obj> o) {
    PlantMeta m;
    if (!o) return m;
    m.v_base_ll = o->num("v_base_ll", m.v_base_ll);
    m.s_base = o->num("s_base", m.s_base);
    m.vdc = o->num("vdc", m.vdc);
    m.f_switching = o->num("f_switching", m.f_switching);
    o->finish();
    return m;
}

UnitSpec parse_unit(Obj o, const std::string& origin) {
    UnitSpec u;
    u.id = o.str("id");
    u.law = parse_law(o.str("law"), o.path(), origin);
    u.x_coupling = o.num("x_coupling", u.x_coupling);
    u.rating = o.num("rating", u.rating);
    u.tau_meas = o.num("tau_meas", u.tau_meas);
    u.q_ref = o.num("q_ref", u.q_ref);
    if (o.has("v0")) u.v0 = o.num("v0");

    switch (u.law) {
        case ControlLaw::droop:
            u.params = parse_droop(o.child("droop"));
            break;
        case ControlLaw::vsm:
        case ControlLaw::vsm_damped:
            u.params = parse_vsm(o.child("vsm"));
            break;
        case ControlLaw::psl:
            u.params = parse_psl(o.child("psl"));
            break;
        case ControlLaw::voc:
            u.params = parse_voc(o.child("voc"));
            break;
        case ControlLaw::blend: {
            Obj b = o.child("blend");
            BlendParams bp;
            bp.weights = parse_weights(b.child("weights"));
            bp.droop = parse_droop(b.child("droop"));
            bp.vsm = parse_vsm(b.child("vsm"));
            bp.psl = parse_psl(b.child("psl"));
            bp.voc = parse_voc(b.child("voc"));
            b.finish();
            u.params = bp;
            break;
        }
    }
    if (auto sec = o.child_opt("secondary")) u.secondary = parse_secondary(*sec);
    o.finish();
    try {
        u.validate();
    } catch (const Error& e) {
        throw ConfigError(origin + ": " + o.path() + ": " + e.what());
    }
    return u;
}

UnitTemplate parse_template(Obj o, const std::string& origin) {
    UnitTemplate t;
    t.droop = parse_droop(o.child("droop"));
    t.vsm = parse_vsm(o.child("vsm"));
    t.psl = parse_psl(o.child("psl"));
    t.voc = parse_voc(o.child("voc"));
    t.x_coupling = o.num("x_coupling", t.x_coupling);
    t.rating = o.num("rating", t.rating);
    t.tau_meas = o.num("tau_meas", t.tau_meas);
    t.q_ref = o.num("q_ref", t.q_ref);
    if (o.has("v0")) t.v0 = o.num("v0");
    if (auto sec = o.child_opt("secondary")) t.secondary = parse_secondary(*sec);
    o.finish();
    (void)origin;
    return t;
}

ObjectiveWindow parse_window(std::optional<Obj> o) {
    ObjectiveWindow w;
    if (!o) return w;
    w.omega_target = o->num("omega_target", w.omega_target);
    w.t_start = o->num("t_start", w.t_start);
    w.stride = static_cast<int>(o->integer("stride", w.stride));
    o->finish();
    return w;
}

}  // namespace

SimulateConfig parse_simulate_config(const std::string& json_text, const std::string& origin) {
    const json j = parse_json(json_text, origin);
    Obj root{j, "", origin};

    SimulateConfig cfg;
    cfg.scenario = parse_scenario(root.child("scenario"), origin);
    cfg.grid = parse_grid(root.child("grid"));
    const json& units = root.array("units");
    int idx = 0;
    for (const auto& ju : units) {
        cfg.units.push_back(parse_unit(Obj{ju, "/units/" + std::to_string(idx), origin}, origin));
        ++idx;
    }
    cfg.plant = parse_plant(root.child_opt("plant"));
    root.finish();

    try {
        cfg.scenario.validate();
        cfg.grid.validate();
    } catch (const Error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    if (cfg.units.empty()) throw ConfigError(origin + ": /units must not be empty");
    return cfg;
}

SimulateConfig load_simulate_config(const std::filesystem::path& path) {
    return parse_simulate_config(read_file(path), path.string());
}

OptimizeFileConfig load_optimize_config(const std::filesystem::path& path) {
    const std::string origin = path.string();
    const json j = parse_json(read_file(path), origin);
    Obj root{j, "", origin};

    OptimizeFileConfig cfg;
    cfg.scenario = parse_scenario(root.child("scenario"), origin);
    cfg.grid = parse_grid(root.child("grid"));
    cfg.tmpl = parse_template(root.child("unit_template"), origin);
    cfg.window = parse_window(root.child_opt("objective"));
    if (auto w0 = root.child_opt("w0")) {
        cfg.w0 = {w0->num("alpha"), w0->num("beta"), w0->num("gamma"), w0->num("nu")};
        w0->finish();
    }
    if (auto s = root.child_opt("solver")) {
        cfg.solver.max_iterations = static_cast<int>(s->integer("max_iterations", 500));
        cfg.solver.improvement_tol = s->num("improvement_tol", 1e-10);
        s->finish();
    }
    cfg.oracle_grid = root.num("oracle_grid", cfg.oracle_grid);
    cfg.plant = parse_plant(root.child_opt("plant"));
    root.finish();

    try {
        cfg.scenario.validate();
        cfg.grid.validate();
    } catch (const Error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return cfg;
}

TrainFileConfig load_train_config(const std::filesystem::path& path) {
    const std::string origin = path.string();
    const json j = parse_json(read_file(path), origin);
    Obj root{j, "", origin};

    TrainFileConfig cfg;
    Obj d = root.child("dataset");
    for (const auto& jk : d.array("kinds")) {
        if (!jk.is_string()) throw ConfigError(origin + ": /dataset/kinds entries must be strings");
        cfg.dataset.kinds.push_back(
            parse_event_kind(jk.get<std::string>(), "/dataset/kinds", origin));
    }
    for (const auto& js : d.array("seeds")) {
        if (!js.is_number_integer()) {
            throw ConfigError(origin + ": /dataset/seeds entries must be integers");
        }
        cfg.dataset.seeds.push_back(js.get<long long>());
    }
    cfg.dataset.t_end = d.num("t_end", cfg.dataset.t_end);
    cfg.dataset.dt = d.num("dt", cfg.dataset.dt);
    cfg.dataset.event_time = d.num("event_time", cfg.dataset.event_time);
    cfg.dataset.base_magnitude = d.num("base_magnitude", cfg.dataset.base_magnitude);
    cfg.dataset.fault_level = d.num("fault_level", cfg.dataset.fault_level);
    cfg.dataset.fault_duration = d.num("fault_duration", cfg.dataset.fault_duration);
    cfg.dataset.load_r = d.num("load_r", cfg.dataset.load_r);
    cfg.dataset.base_grid = parse_grid(d.child("grid"));
    cfg.dataset.companion_x_coupling = d.num("companion_x_coupling", 0.05);
    cfg.options.window = d.num("window", cfg.options.window);
    cfg.options.brute_grid = d.num("brute_grid", cfg.options.brute_grid);
    d.finish();

    cfg.tmpl = parse_template(root.child("unit_template"), origin);
    cfg.dataset.companion_droop = cfg.tmpl.droop;

    if (auto m = root.child_opt("mlp")) {
        if (const json* hl = m->array_opt("hidden_layers")) {
            cfg.hidden_layers.clear();
            for (const auto& v : *hl) {
                if (!v.is_number_integer()) {
                    throw ConfigError(origin + ": /mlp/hidden_layers entries must be integers");
                }
                cfg.hidden_layers.push_back(v.get<int>());
            }
        }
        cfg.train.mu_init = m->num("mu_init", cfg.train.mu_init);
        cfg.train.mu_inc = m->num("mu_inc", cfg.train.mu_inc);
        cfg.train.mu_dec = m->num("mu_dec", cfg.train.mu_dec);
        cfg.train.mu_max = m->num("mu_max", cfg.train.mu_max);
        cfg.train.max_epochs = static_cast<int>(m->integer("max_epochs", cfg.train.max_epochs));
        cfg.train.val_patience =
            static_cast<int>(m->integer("val_patience", cfg.train.val_patience));
        if (const json* sp = m->array_opt("split")) {
            if (sp->size() != 3) throw ConfigError(origin + ": /mlp/split must have 3 fractions");
            for (int i = 0; i < 3; ++i) {
                cfg.train.split_fractions[static_cast<std::size_t>(i)] =
                    (*sp)[static_cast<std::size_t>(i)].get<double>();
            }
        }
        cfg.train.seed = m->integer("seed", cfg.train.seed);
        m->finish();
    }
    cfg.options.split_fractions = cfg.train.split_fractions;
    cfg.options.seed = cfg.train.seed;

    if (auto l = root.child_opt("lstm")) {
        cfg.lstm_hidden = static_cast<int>(l->integer("hidden", cfg.lstm_hidden));
        cfg.lstm.learning_rate = l->num("learning_rate", cfg.lstm.learning_rate);
        cfg.lstm.epochs = static_cast<int>(l->integer("epochs", cfg.lstm.epochs));
        cfg.lstm_seed = l->integer("seed", cfg.lstm_seed);
        l->finish();
    }
    root.finish();
    return cfg;
}

SweepFileConfig load_sweep_config(const std::filesystem::path& path) {
    const std::string origin = path.string();
    const json j = parse_json(read_file(path), origin);
    Obj root{j, "", origin};

    SweepFileConfig cfg;
    cfg.origin = origin;
    if (!j.contains("base")) throw ConfigError(origin + ": missing required key '/base'");
    {
        Obj marker = root.child("base");  // marks the key as consumed
        (void)marker;
    }
    cfg.base_json = j.at("base").dump();

    Obj s = root.child("sweep");
    cfg.param_pointer = s.str("param");
    for (const auto& v : s.array("values")) {
        if (!v.is_number()) throw ConfigError(origin + ": /sweep/values entries must be numbers");
        cfg.values.push_back(v.get<double>());
    }
    cfg.optimize = s.boolean("optimize", false);
    if (auto t = s.child_opt("unit_template")) cfg.tmpl = parse_template(*t, origin);
    cfg.window = parse_window(s.child_opt("objective"));
    s.finish();
    root.finish();

    if (cfg.values.empty()) throw ConfigError(origin + ": /sweep/values must not be empty");
    if (cfg.optimize && !cfg.tmpl) {
        throw ConfigError(origin + ": /sweep/optimize requires /sweep/unit_template");
    }
    // validate the base config and the pointer eagerly
    parse_simulate_config(cfg.base_json, origin + " (/base)");
    apply_override(cfg.base_json, cfg.param_pointer, cfg.values.front(), origin);
    return cfg;
}

std::string apply_override(const std::string& json_text, const std::string& pointer,
                           double value, const std::string& origin) {
    json j = parse_json(json_text, origin);
    try {
        const json::json_pointer ptr(pointer);
        if (!j.contains(ptr)) {
            throw ConfigError(origin + ": sweep param pointer '" + pointer + "' not found");
        }
        j[ptr] = value;
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": bad sweep param pointer '" + pointer + "': " + e.what());
    }
    return j.dump();
}

}  // namespace gfmlab
