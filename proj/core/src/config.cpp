#include "echosim/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace echosim::harness {

using nlohmann::json;

namespace {

enum class Dim { frequency, time, voltage, rate, sweep_rate, none };

struct Unit {
    const char* name;
    double factor;
};

const std::map<Dim, std::vector<Unit>>& unit_table() {
    static const std::map<Dim, std::vector<Unit>> t{
        {Dim::frequency,
         {{"GHz", 1e9}, {"MHz", 1e6}, {"kHz", 1e3}, {"Hz", 1.0}}},
        {Dim::time, {{"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}, {"s", 1.0}}},
        {Dim::voltage, {{"kV", 1e3}, {"mV", 1e-3}, {"V", 1.0}}},
        {Dim::rate,
         {{"GHz", 1e9}, {"MHz", 1e6}, {"kHz", 1e3}, {"Hz", 1.0}, {"1/s", 1.0}, {"/s", 1.0}}},
        {Dim::sweep_rate,
         {{"GHz/s", 1e9}, {"MHz/s", 1e6}, {"kHz/s", 1e3}, {"Hz/s", 1.0}}},
    };
    return t;
}

const char* dim_name(Dim d) {
    switch (d) {
        case Dim::frequency: return "frequency (Hz)";
        case Dim::time: return "time (s)";
        case Dim::voltage: return "voltage (V)";
        case Dim::rate: return "rate (1/s)";
        case Dim::sweep_rate: return "sweep rate (Hz/s)";
        default: return "number";
    }
}

// "2.78 MHz" -> SI value; the unit suffix is mandatory.
bool parse_quantity(const std::string& text, Dim dim, double& out,
                    std::string& err) {
    std::size_t pos = 0;
    while (pos < text.size() && text[pos] == ' ') ++pos;
    char* end = nullptr;
    const double v = std::strtod(text.c_str() + pos, &end);
    if (end == text.c_str() + pos) {
        err = "cannot parse a number from \"" + text + "\"";
        return false;
    }
    std::string unit(end);
    while (!unit.empty() && unit.front() == ' ') unit.erase(unit.begin());
    while (!unit.empty() && unit.back() == ' ') unit.pop_back();
    if (unit.empty()) {
        err = "missing unit suffix, expected " + std::string(dim_name(dim));
        return false;
    }
    for (const auto& u : unit_table().at(dim)) {
        if (unit == u.name) {
            out = v * u.factor;
            return true;
        }
    }
    err = "unit \"" + unit + "\" is not a " + dim_name(dim);
    return false;
}

struct Issues {
    std::vector<ValidationIssue>* sink;
    void add(const std::string& path, const std::string& msg) {
        sink->push_back({path, msg});
    }
};

// One schema entry per config key.
struct Entry {
    Dim dim = Dim::none;
    enum Kind { quantity, number, integer, text, quantity_array, number_array,
                integer_array } kind = quantity;
    double lo = -1e300;
    double hi = 1e300;
    std::function<void(ScenarioConfig&, double)> set_num;
    std::function<void(ScenarioConfig&, const std::string&)> set_text;
    std::function<void(ScenarioConfig&, const std::vector<double>&)> set_array;
};

std::map<std::string, Entry> build_schema() {
    std::map<std::string, Entry> s;
    auto num = [](double lo, double hi,
                  std::function<void(ScenarioConfig&, double)> f) {
        Entry e;
        e.kind = Entry::number;
        e.lo = lo;
        e.hi = hi;
        e.set_num = std::move(f);
        return e;
    };
    auto qty = [](Dim d, double lo, double hi,
                  std::function<void(ScenarioConfig&, double)> f) {
        Entry e;
        e.dim = d;
        e.kind = Entry::quantity;
        e.lo = lo;
        e.hi = hi;
        e.set_num = std::move(f);
        return e;
    };
    auto integer = [](double lo, double hi,
                      std::function<void(ScenarioConfig&, double)> f) {
        Entry e;
        e.kind = Entry::integer;
        e.lo = lo;
        e.hi = hi;
        e.set_num = std::move(f);
        return e;
    };

    s["seed"] = integer(0, 1e18, [](auto& c, double v) {
        c.seed = static_cast<std::uint64_t>(v);
    });

    s["comb.delta"] = qty(Dim::frequency, 1e-9, 1e300,
                          [](auto& c, double v) { c.comb.delta_hz = v; });
    s["comb.peak_fwhm"] = qty(Dim::frequency, 1e-9, 1e300,
                              [](auto& c, double v) { c.comb.peak_fwhm_hz = v; });
    s["comb.peak_depth"] =
        num(0, 1e6, [](auto& c, double v) { c.comb.peak_depth = v; });
    s["comb.background"] =
        num(0, 1e6, [](auto& c, double v) { c.comb.background = v; });
    s["comb.n_peaks"] = integer(1, 1e6, [](auto& c, double v) {
        c.comb.n_peaks = static_cast<int>(v);
    });
    s["comb.center_offset"] = qty(Dim::frequency, -1e300, 1e300,
                                  [](auto& c, double v) { c.comb.center_offset_hz = v; });

    s["line.fwhm"] = qty(Dim::frequency, 1e-9, 1e300,
                         [](auto& c, double v) { c.line.fwhm_hz = v; });
    s["line.depth"] = num(0, 1e6, [](auto& c, double v) { c.line.depth = v; });
    s["line.background"] =
        num(0, 1e6, [](auto& c, double v) { c.line.background = v; });

    s["window.width"] = qty(Dim::frequency, 1e-9, 1e300,
                            [](auto& c, double v) { c.window.width_hz = v; });
    s["window.points"] = integer(256, 1 << 22, [](auto& c, double v) {
        c.window.points = static_cast<int>(v);
    });

    s["pulse.fwhm"] = qty(Dim::time, 1e-15, 1e300,
                          [](auto& c, double v) { c.pulse.fwhm_s = v; });
    s["pulse.mean_photons"] =
        num(0, 1e300, [](auto& c, double v) { c.pulse.mean_photons = v; });
    s["pulse.center_time"] = qty(Dim::time, 0, 1e300,
                                 [](auto& c, double v) { c.pulse.center_time_s = v; });
    s["pulse.carrier_offset"] =
        qty(Dim::frequency, -1e300, 1e300,
            [](auto& c, double v) { c.pulse.carrier_offset_hz = v; });

    s["field.u1"] = qty(Dim::voltage, 0, 1e300,
                        [](auto& c, double v) { c.field.u1_v = v; });
    s["field.u2"] = qty(Dim::voltage, 0, 1e300,
                        [](auto& c, double v) { c.field.u2_v = v; });
    s["field.on_delay"] = qty(Dim::time, -1e300, 1e300,
                              [](auto& c, double v) { c.field.on_delay_s = v; });
    s["field.flip_delay"] = qty(Dim::time, 1e-15, 1e300,
                                [](auto& c, double v) { c.field.flip_delay_s = v; });
    s["field.calib_u_ref"] =
        qty(Dim::voltage, 1e-12, 1e300,
            [](auto& c, double v) { c.field.calib.u_ref_volts = v; });
    s["field.calib_b_ref"] = num(1.0 + 1e-12, 1e6, [](auto& c, double v) {
        c.field.calib.b_ref = v;
    });

    s["detector.efficiency"] =
        num(0, 1, [](auto& c, double v) { c.detector.efficiency = v; });
    s["detector.dark_rate"] = qty(Dim::rate, 0, 1e300,
                                  [](auto& c, double v) { c.detector.dark_rate_hz = v; });
    s["detector.path_transmission"] =
        num(0, 1, [](auto& c, double v) { c.detector.path_transmission = v; });
    s["detector.fluorescence_collection"] = num(0, 1, [](auto& c, double v) {
        c.detector.fluorescence_collection = v;
    });

    s["material.t1"] = qty(Dim::time, 1e-15, 1e300,
                           [](auto& c, double v) { c.material.t1_s = v; });
    s["material.tz"] = qty(Dim::time, 1e-15, 1e300,
                           [](auto& c, double v) { c.material.tz_s = v; });
    s["material.t_persistent"] =
        qty(Dim::time, 1e-15, 1e300,
            [](auto& c, double v) { c.material.t_persistent_s = v; });
    s["material.beta"] =
        num(0, 1, [](auto& c, double v) { c.material.branch_beta = v; });
    s["material.persistent_fraction"] = num(0, 1, [](auto& c, double v) {
        c.material.persistent_fraction = v;
    });
    s["material.ions"] = num(1, 1e30, [](auto& c, double v) {
        c.material.ensemble_ions = v;
    });

    s["pump.duration"] = qty(Dim::time, 0, 1e300,
                             [](auto& c, double v) { c.pump.duration_s = v; });
    s["pump.span"] = qty(Dim::frequency, 0, 1e300,
                         [](auto& c, double v) { c.pump.sweep_span_hz = v; });
    s["pump.sweep_rate"] =
        qty(Dim::sweep_rate, 0, 1e300,
            [](auto& c, double v) { c.pump.sweep_rate_hz_per_s = v; });
    s["pump.rate"] = qty(Dim::rate, 0, 1e300,
                         [](auto& c, double v) { c.pump.pump_rate_per_s = v; });
    s["pump.resonance_width"] =
        qty(Dim::frequency, 0, 1e300,
            [](auto& c, double v) { c.pump.resonance_width_hz = v; });
    s["pump.stimulation_gain"] =
        num(1, 1e9, [](auto& c, double v) { c.pump.stimulation_gain = v; });
    s["pump.t_extra"] = qty(Dim::time, 0, 1e300,
                            [](auto& c, double v) { c.pump.t_extra_s = v; });
    s["pump.t_wait"] = qty(Dim::time, 0, 1e300,
                           [](auto& c, double v) { c.pump.t_wait_s = v; });
    s["pump.gate_half_width"] =
        qty(Dim::frequency, 0, 1e300,
            [](auto& c, double v) { c.pump_gate_half_width_hz = v; });
    {
        Entry e;
        e.kind = Entry::text;
        e.set_text = [](ScenarioConfig& c, const std::string& v) {
            if (v == "averaged")
                c.pump.sweep_model = pumping::SweepModel::averaged;
            else if (v == "explicit")
                c.pump.sweep_model = pumping::SweepModel::explicit_window;
            else
                throw std::invalid_argument("must be \"averaged\" or \"explicit\"");
        };
        s["pump.model"] = e;
    }

    s["noise.sigma"] =
        num(0, 100, [](auto& c, double v) { c.noise.sigma_rad = v; });

    s["trials.n"] = integer(1, 1e15, [](auto& c, double v) {
        c.trials.n = static_cast<std::uint64_t>(v);
    });
    s["trials.cycles"] = integer(1, 1e12, [](auto& c, double v) {
        c.trials.cycles = static_cast<std::uint64_t>(v);
    });
    s["trials.bin_width"] = qty(Dim::time, 1e-15, 1e300,
                                [](auto& c, double v) { c.trials.bin_width_s = v; });

    s["scan.wait_start"] = qty(Dim::time, 0, 1e300,
                               [](auto& c, double v) { c.scan.wait_start_s = v; });
    s["scan.wait_stop"] = qty(Dim::time, 1e-15, 1e300,
                              [](auto& c, double v) { c.scan.wait_stop_s = v; });
    s["scan.wait_points"] = integer(2, 1e6, [](auto& c, double v) {
        c.scan.wait_points = static_cast<int>(v);
    });
    s["scan.fringe_points"] = integer(6, 1e6, [](auto& c, double v) {
        c.scan.fringe_points = static_cast<int>(v);
    });
    {
        Entry e;
        e.kind = Entry::number_array;
        e.lo = 1e-12;
        e.set_array = [](ScenarioConfig& c, const std::vector<double>& v) {
            c.scan.nbar = v;
        };
        s["scan.nbar"] = e;
        e.lo = 1.0;
        e.set_array = [](ScenarioConfig& c, const std::vector<double>& v) {
            c.scan.stim_gains = v;
        };
        s["scan.stim_gains"] = e;
        e.lo = 1e-12;
        e.set_array = [](ScenarioConfig& c, const std::vector<double>& v) {
            c.scan.d_values = v;
        };
        s["scan.d_values"] = e;
    }
    {
        Entry e;
        e.kind = Entry::integer_array;
        e.lo = 1;
        e.set_array = [](ScenarioConfig& c, const std::vector<double>& v) {
            c.scan.orders.assign(v.size(), 0);
            for (std::size_t i = 0; i < v.size(); ++i)
                c.scan.orders[i] = static_cast<int>(v[i]);
        };
        s["scan.orders"] = e;
    }
    {
        Entry e;
        e.kind = Entry::quantity_array;
        e.dim = Dim::time;
        e.lo = 1e-15;
        e.set_array = [](ScenarioConfig& c, const std::vector<double>& v) {
            c.scan.flip_delays_s = v;
        };
        s["scan.flip_delays"] = e;
        e.dim = Dim::voltage;
        e.set_array = [](ScenarioConfig& c, const std::vector<double>& v) {
            c.scan.u2_values_v = v;
        };
        s["scan.u2_values"] = e;
    }

    s["storage.t_end"] = qty(Dim::time, 1e-15, 1e300,
                             [](auto& c, double v) { c.storage.t_end_s = v; });
    s["storage.dt"] = qty(Dim::time, 1e-18, 1e300,
                          [](auto& c, double v) { c.storage.dt_s = v; });
    return s;
}

const std::map<std::string, Entry>& schema() {
    static const auto s = build_schema();
    return s;
}

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> n{
        "afc-echo",     "noise-decay",  "snr-vs-wait",     "crib-echo",
        "pulse-shape",  "fringe-scan",  "combined-gate",   "capacity-curves"};
    return n;
}

ScenarioConfig scenario_defaults(const std::string& name) {
    ScenarioConfig c;
    c.scenario = name;
    c.detector.fluorescence_collection = 2e-4;
    c.material.persistent_fraction = 0.3;

    if (name == "afc-echo") {
        c.comb = {2.78e6, 2.78e6 / 2.6, 0.5, 1.5, 15, 0.0};
        c.window = {60e6, 16384};
        c.pulse = {300e-9, 100e-9, 0.5, 0.0};
        c.storage = {1.3e-6, 1.6e-9};
        c.trials.n = 20000000;
        c.trials.bin_width_s = 20e-9;
    } else if (name == "noise-decay") {
        c.line = {5e6, 2.0, 0.0};
        c.window = {30e6, 1024};
        c.material.ensemble_ions = 1e8;
        c.pump.duration_s = 120e-3;
        c.pump.sweep_span_hz = 8e6;
        c.pump.pump_rate_per_s = 2e4;
        c.pump.t_extra_s = 10e-3;
        c.pump.stimulation_gain = 10.0;
        c.scan.wait_start_s = 4e-3;
        c.scan.wait_stop_s = 40e-3;
        c.scan.wait_points = 13;
        c.trials.n = 3000000;
        c.trials.bin_width_s = 1e-6;
    } else if (name == "snr-vs-wait") {
        c.line = {5e6, 2.0, 0.0};
        c.window = {30e6, 1024};
        c.material.ensemble_ions = 1e8;
        c.pump.duration_s = 120e-3;
        c.pump.sweep_span_hz = 8e6;
        c.pump.pump_rate_per_s = 2e4;
        c.pump.t_extra_s = 23.5e-3;
        c.pump.stimulation_gain = 10.0;
        c.pump_gate_half_width_hz = 0.35e6;
        c.pulse = {1.0e-6, 200e-9, 27.0, 0.0};
        c.field = {70.0, 70.0, -0.6e-6, 0.5e-6, {70.0, 3.0}};
        c.storage = {3.6e-6, 2.4e-9};
        c.scan.wait_start_s = 5e-3;
        c.scan.wait_stop_s = 100e-3;
        c.scan.wait_points = 10;
        c.trials.n = 1000000000;
        c.trials.bin_width_s = 100e-9;
    } else if (name == "crib-echo") {
        c.line = {0.4e6, 2.0, 1.5};
        c.window = {30e6, 8192};
        c.pulse = {0.4e-6, 100e-9, 0.9, 0.0};
        c.field = {70.0, 70.0, -0.3e-6, 0.6e-6, {70.0, 3.0}};
        c.scan.flip_delays_s = {0.6e-6, 1.0e-6};
        c.storage = {2.8e-6, 3.0e-9};
        c.trials.n = 25000000;
        c.trials.bin_width_s = 40e-9;
    } else if (name == "pulse-shape") {
        c.line = {60e3, 2.0, 0.0};
        c.window = {8e6, 1024};
        c.pulse = {1.5e-6, 600e-9, 10.0, 0.0};
        c.field = {65.0, 65.0, -1.0e-6, 1.0e-6, {70.0, 3.0}};
        c.scan.u2_values_v = {35, 65, 95};
        c.storage = {8.0e-6, 12e-9};
        c.trials.n = 5000000;
        c.trials.bin_width_s = 100e-9;
    } else if (name == "fringe-scan") {
        c.comb = {2.78e6, 2.78e6 / 2.6, 0.5, 1.5, 15, 0.0};
        c.window = {60e6, 16384};
        c.pulse = {300e-9, 100e-9, 2.0, 0.0};
        c.storage = {1.3e-6, 1.6e-9};
        c.noise.sigma_rad = 0.48277;
        c.scan.orders = {1, 2};
        c.scan.fringe_points = 32;
        c.trials.n = 40000000;
        c.trials.cycles = 2000;
    } else if (name == "combined-gate") {
        c.comb = {2.78e6, 2.78e6 / 10.0, 0.5, 0.3, 15, 0.0};
        c.window = {60e6, 16384};
        c.pulse = {200e-9, 40e-9, 8.0, 0.0};
        c.field = {1015.0, 1015.0, 50e-9, 0.36e-6, {70.0, 3.0}};
        c.storage = {1.2e-6, 1.6e-9};
        c.trials.n = 10000000;
        c.trials.bin_width_s = 10e-9;
    } else if (name == "capacity-curves") {
        c.comb = {2.78e6, 2.78e6 / 2.6, 0.5, 1.5, 15, 0.0};
        c.line = {1e6, 2.0, 0.0};
        c.scan.d_values = {2, 4, 8};
    }
    return c;
}

void flatten(const json& j, const std::string& prefix,
             std::vector<std::pair<std::string, const json*>>& out) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string path =
            prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it->is_object())
            flatten(*it, path, out);
        else
            out.emplace_back(path, &*it);
    }
}

}  // namespace

ValidationResult validate_config(const std::string& json_text) {
    ValidationResult res;
    Issues issues{&res.issues};

    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& ex) {
        issues.add("", std::string("not valid JSON: ") + ex.what());
        return res;
    }
    if (!j.is_object()) {
        issues.add("", "top level must be an object");
        return res;
    }
    if (!j.contains("scenario") || !j["scenario"].is_string()) {
        issues.add("scenario", "required string naming the scenario");
        return res;
    }
    const std::string name = j["scenario"].get<std::string>();
    bool known = false;
    for (const auto& n : scenario_names()) known = known || n == name;
    if (!known) {
        issues.add("scenario", "unknown scenario \"" + name + "\"");
        return res;
    }
    res.config = scenario_defaults(name);

    std::vector<std::pair<std::string, const json*>> leaves;
    flatten(j, "", leaves);
    for (const auto& [path, value] : leaves) {
        if (path == "scenario") continue;
        const auto it = schema().find(path);
        if (it == schema().end()) {
            issues.add(path, "unknown key");
            continue;
        }
        const Entry& e = it->second;
        try {
            switch (e.kind) {
                case Entry::quantity: {
                    if (!value->is_string()) {
                        issues.add(path, "dimensioned quantity requires a unit "
                                         "suffix, e.g. \"2.78 MHz\"");
                        break;
                    }
                    double v = 0.0;
                    std::string err;
                    if (!parse_quantity(value->get<std::string>(), e.dim, v, err)) {
                        issues.add(path, err);
                        break;
                    }
                    if (v < e.lo || v > e.hi) {
                        issues.add(path, "value out of range");
                        break;
                    }
                    e.set_num(res.config, v);
                    break;
                }
                case Entry::number:
                case Entry::integer: {
                    if (!value->is_number()) {
                        issues.add(path, "expected a plain number");
                        break;
                    }
                    const double v = value->get<double>();
                    if (e.kind == Entry::integer && v != std::floor(v)) {
                        issues.add(path, "expected an integer");
                        break;
                    }
                    if (v < e.lo || v > e.hi) {
                        issues.add(path, "value out of range [" +
                                             std::to_string(e.lo) + ", " +
                                             std::to_string(e.hi) + "]");
                        break;
                    }
                    e.set_num(res.config, v);
                    break;
                }
                case Entry::text: {
                    if (!value->is_string()) {
                        issues.add(path, "expected a string");
                        break;
                    }
                    e.set_text(res.config, value->get<std::string>());
                    break;
                }
                case Entry::quantity_array:
                case Entry::number_array:
                case Entry::integer_array: {
                    if (!value->is_array()) {
                        issues.add(path, "expected an array");
                        break;
                    }
                    std::vector<double> vals;
                    bool bad = false;
                    for (const auto& el : *value) {
                        if (e.kind == Entry::quantity_array) {
                            if (!el.is_string()) {
                                issues.add(path, "array elements need unit "
                                                 "suffixes");
                                bad = true;
                                break;
                            }
                            double v = 0.0;
                            std::string err;
                            if (!parse_quantity(el.get<std::string>(), e.dim, v,
                                                err)) {
                                issues.add(path, err);
                                bad = true;
                                break;
                            }
                            vals.push_back(v);
                        } else {
                            if (!el.is_number()) {
                                issues.add(path, "array elements must be numbers");
                                bad = true;
                                break;
                            }
                            vals.push_back(el.get<double>());
                        }
                        if (vals.back() < e.lo || vals.back() > e.hi) {
                            issues.add(path, "array element out of range");
                            bad = true;
                            break;
                        }
                    }
                    if (!bad && vals.empty()) {
                        issues.add(path, "array must not be empty");
                        bad = true;
                    }
                    if (!bad) e.set_array(res.config, vals);
                    break;
                }
            }
        } catch (const std::exception& ex) {
            issues.add(path, ex.what());
        }
    }

    res.ok = res.issues.empty();
    return res;
}

namespace {

std::string fmt_si(double v, Dim d) {
    char buf[64];
    const auto& units = unit_table().at(d);
    // Pick the largest unit that keeps the mantissa >= 1.
    const Unit* best = &units.back();
    for (const auto& u : units) {
        if (u.name[0] == '1' || u.name[0] == '/') continue;
        if (std::abs(v) >= u.factor * (1.0 - 1e-12)) {
            best = &u;
            break;
        }
    }
    if (v == 0.0) best = &units.back();
    std::snprintf(buf, sizeof buf, "%.10g %s", v / best->factor, best->name);
    return buf;
}

}  // namespace

std::string ScenarioConfig::canonical_json() const {
    json j;
    j["scenario"] = scenario;
    j["seed"] = seed;
    j["comb"] = {{"delta_hz", comb.delta_hz},
                 {"peak_fwhm_hz", comb.peak_fwhm_hz},
                 {"peak_depth", comb.peak_depth},
                 {"background", comb.background},
                 {"n_peaks", comb.n_peaks},
                 {"center_offset_hz", comb.center_offset_hz}};
    j["line"] = {{"fwhm_hz", line.fwhm_hz},
                 {"depth", line.depth},
                 {"background", line.background}};
    j["window"] = {{"width_hz", window.width_hz}, {"points", window.points}};
    j["pulse"] = {{"center_time_s", pulse.center_time_s},
                  {"fwhm_s", pulse.fwhm_s},
                  {"mean_photons", pulse.mean_photons},
                  {"carrier_offset_hz", pulse.carrier_offset_hz}};
    j["field"] = {{"u1_v", field.u1_v},
                  {"u2_v", field.u2_v},
                  {"on_delay_s", field.on_delay_s},
                  {"flip_delay_s", field.flip_delay_s},
                  {"calib_u_ref_v", field.calib.u_ref_volts},
                  {"calib_b_ref", field.calib.b_ref}};
    j["detector"] = {{"efficiency", detector.efficiency},
                     {"dark_rate_hz", detector.dark_rate_hz},
                     {"path_transmission", detector.path_transmission},
                     {"fluorescence_collection", detector.fluorescence_collection}};
    j["material"] = {{"t1_s", material.t1_s},
                     {"tz_s", material.tz_s},
                     {"t_persistent_s", material.t_persistent_s},
                     {"beta", material.branch_beta},
                     {"persistent_fraction", material.persistent_fraction},
                     {"ensemble_ions", material.ensemble_ions}};
    j["pump"] = {{"duration_s", pump.duration_s},
                 {"span_hz", pump.sweep_span_hz},
                 {"sweep_rate_hz_per_s", pump.sweep_rate_hz_per_s},
                 {"rate_per_s", pump.pump_rate_per_s},
                 {"resonance_width_hz", pump.resonance_width_hz},
                 {"stimulation_gain", pump.stimulation_gain},
                 {"t_extra_s", pump.t_extra_s},
                 {"t_wait_s", pump.t_wait_s},
                 {"gate_half_width_hz", pump_gate_half_width_hz},
                 {"model", pump.sweep_model == pumping::SweepModel::averaged
                               ? "averaged"
                               : "explicit"}};
    j["noise"] = {{"sigma_rad", noise.sigma_rad}};
    j["trials"] = {{"n", trials.n},
                   {"cycles", trials.cycles},
                   {"bin_width_s", trials.bin_width_s}};
    j["scan"] = {{"wait_start_s", scan.wait_start_s},
                 {"wait_stop_s", scan.wait_stop_s},
                 {"wait_points", scan.wait_points},
                 {"nbar", scan.nbar},
                 {"fringe_points", scan.fringe_points},
                 {"stim_gains", scan.stim_gains},
                 {"orders", scan.orders},
                 {"flip_delays_s", scan.flip_delays_s},
                 {"u2_values_v", scan.u2_values_v},
                 {"d_values", scan.d_values}};
    j["storage"] = {{"t_end_s", storage.t_end_s}, {"dt_s", storage.dt_s}};
    return j.dump();
}

std::string default_config_json(const std::string& scenario) {
    bool known = false;
    for (const auto& n : scenario_names()) known = known || n == scenario;
    if (!known)
        throw std::invalid_argument("unknown scenario \"" + scenario + "\"");
    const ScenarioConfig c = scenario_defaults(scenario);
    json j;
    j["scenario"] = c.scenario;
    j["seed"] = c.seed;
    j["comb"] = {{"delta", fmt_si(c.comb.delta_hz, Dim::frequency)},
                 {"peak_fwhm", fmt_si(c.comb.peak_fwhm_hz, Dim::frequency)},
                 {"peak_depth", c.comb.peak_depth},
                 {"background", c.comb.background},
                 {"n_peaks", c.comb.n_peaks},
                 {"center_offset", fmt_si(c.comb.center_offset_hz, Dim::frequency)}};
    j["line"] = {{"fwhm", fmt_si(c.line.fwhm_hz, Dim::frequency)},
                 {"depth", c.line.depth},
                 {"background", c.line.background}};
    j["window"] = {{"width", fmt_si(c.window.width_hz, Dim::frequency)},
                   {"points", c.window.points}};
    j["pulse"] = {{"center_time", fmt_si(c.pulse.center_time_s, Dim::time)},
                  {"fwhm", fmt_si(c.pulse.fwhm_s, Dim::time)},
                  {"mean_photons", c.pulse.mean_photons},
                  {"carrier_offset", fmt_si(c.pulse.carrier_offset_hz, Dim::frequency)}};
    j["field"] = {{"u1", fmt_si(c.field.u1_v, Dim::voltage)},
                  {"u2", fmt_si(c.field.u2_v, Dim::voltage)},
                  {"on_delay", fmt_si(c.field.on_delay_s, Dim::time)},
                  {"flip_delay", fmt_si(c.field.flip_delay_s, Dim::time)},
                  {"calib_u_ref", fmt_si(c.field.calib.u_ref_volts, Dim::voltage)},
                  {"calib_b_ref", c.field.calib.b_ref}};
    j["detector"] = {{"efficiency", c.detector.efficiency},
                     {"dark_rate", fmt_si(c.detector.dark_rate_hz, Dim::rate)},
                     {"path_transmission", c.detector.path_transmission},
                     {"fluorescence_collection", c.detector.fluorescence_collection}};
    j["material"] = {{"t1", fmt_si(c.material.t1_s, Dim::time)},
                     {"tz", fmt_si(c.material.tz_s, Dim::time)},
                     {"t_persistent", fmt_si(c.material.t_persistent_s, Dim::time)},
                     {"beta", c.material.branch_beta},
                     {"persistent_fraction", c.material.persistent_fraction},
                     {"ions", c.material.ensemble_ions}};
    j["pump"] = {{"duration", fmt_si(c.pump.duration_s, Dim::time)},
                 {"span", fmt_si(c.pump.sweep_span_hz, Dim::frequency)},
                 {"rate", fmt_si(c.pump.pump_rate_per_s, Dim::rate)},
                 {"stimulation_gain", c.pump.stimulation_gain},
                 {"t_extra", fmt_si(c.pump.t_extra_s, Dim::time)},
                 {"t_wait", fmt_si(c.pump.t_wait_s, Dim::time)},
                 {"gate_half_width", fmt_si(c.pump_gate_half_width_hz, Dim::frequency)},
                 {"model", "averaged"}};
    j["noise"] = {{"sigma", c.noise.sigma_rad}};
    j["trials"] = {{"n", c.trials.n},
                   {"cycles", c.trials.cycles},
                   {"bin_width", fmt_si(c.trials.bin_width_s, Dim::time)}};
    json scan;
    scan["wait_start"] = fmt_si(c.scan.wait_start_s, Dim::time);
    scan["wait_stop"] = fmt_si(c.scan.wait_stop_s, Dim::time);
    scan["wait_points"] = c.scan.wait_points;
    scan["nbar"] = c.scan.nbar;
    scan["fringe_points"] = c.scan.fringe_points;
    scan["stim_gains"] = c.scan.stim_gains;
    scan["orders"] = c.scan.orders;
    {
        json arr = json::array();
        for (double v : c.scan.flip_delays_s) arr.push_back(fmt_si(v, Dim::time));
        scan["flip_delays"] = arr;
        arr = json::array();
        for (double v : c.scan.u2_values_v) arr.push_back(fmt_si(v, Dim::voltage));
        scan["u2_values"] = arr;
    }
    scan["d_values"] = c.scan.d_values;
    j["scan"] = scan;
    if (c.storage.t_end_s > 0.0)
        j["storage"] = {{"t_end", fmt_si(c.storage.t_end_s, Dim::time)},
                        {"dt", fmt_si(c.storage.dt_s, Dim::time)}};
    return j.dump(2);
}

}  // namespace echosim::harness
