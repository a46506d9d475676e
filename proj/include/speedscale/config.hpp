#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace speedscale {

/**
 * Flat experiment configuration.  Defaults follow the reference setup:
 * unit arrival rate, quadratic cost with nu = 1/2, lattice step 1/24,
 * truncation at 60 jobs, and the desk-scale replication count (the --full
 * flag restores the original 1000).
 */
struct Config {
    double alpha = 1.0;
    double nu = 0.5;
    double delta = 1.0 / 24.0;
    double x_max = 60.0;
    double p_geo = 0.96;
    double tail_eps = 1e-10;

    double via_tol = 1e-6;
    int via_max_iters = 20000;
    int via_trace_iters = 120;  ///< forced sweeps for the convergence traces

    double eta_basis = 2.0;
    double q_basis = 2.0;

    int stages = 4;
    long steps_per_stage = 30000;
    int replications = 100;
    long mc_episodes = 10000;
    long eval_steps = 200000;  ///< trajectory length for average-cost estimates

    std::vector<double> kappas = {1, 2, 4, 8, 12, 16, 24, 32};

    int threads = 0;  ///< 0 = hardware concurrency
    bool full = false;
    bool svg = false;

    void apply_full_scale() { replications = 1000; }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["alpha"] = alpha;
        j["nu"] = nu;
        j["delta"] = delta;
        j["x_max"] = x_max;
        j["p_geo"] = p_geo;
        j["tail_eps"] = tail_eps;
        j["via_tol"] = via_tol;
        j["via_max_iters"] = via_max_iters;
        j["via_trace_iters"] = via_trace_iters;
        j["eta_basis"] = eta_basis;
        j["q_basis"] = q_basis;
        j["stages"] = stages;
        j["steps_per_stage"] = steps_per_stage;
        j["replications"] = replications;
        j["mc_episodes"] = mc_episodes;
        j["eval_steps"] = eval_steps;
        j["kappas"] = kappas;
        j["full"] = full;
        j["threads"] = threads;
        return j;
    }

    void set_key(const std::string& key, const nlohmann::json& v) {
        if (key == "alpha") alpha = v.get<double>();
        else if (key == "nu") nu = v.get<double>();
        else if (key == "delta") delta = v.get<double>();
        else if (key == "x_max") x_max = v.get<double>();
        else if (key == "p_geo") p_geo = v.get<double>();
        else if (key == "tail_eps") tail_eps = v.get<double>();
        else if (key == "via_tol") via_tol = v.get<double>();
        else if (key == "via_max_iters") via_max_iters = v.get<int>();
        else if (key == "via_trace_iters") via_trace_iters = v.get<int>();
        else if (key == "eta_basis") eta_basis = v.get<double>();
        else if (key == "q_basis") q_basis = v.get<double>();
        else if (key == "stages") stages = v.get<int>();
        else if (key == "steps_per_stage") steps_per_stage = v.get<long>();
        else if (key == "replications") replications = v.get<int>();
        else if (key == "mc_episodes") mc_episodes = v.get<long>();
        else if (key == "eval_steps") eval_steps = v.get<long>();
        else if (key == "kappas") kappas = v.get<std::vector<double>>();
        else if (key == "threads") threads = v.get<int>();
        else if (key == "full") full = v.get<bool>();
        else if (key == "svg") svg = v.get<bool>();
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }

    /// Load overrides from a JSON object or a flat key=value text file.
    void load_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::invalid_argument("config: cannot open " + path);
        std::stringstream buf;
        buf << f.rdbuf();
        std::string text = buf.str();
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && text[first] == '{') {
            nlohmann::json j = nlohmann::json::parse(text);
            for (auto it = j.begin(); it != j.end(); ++it) set_key(it.key(), it.value());
            return;
        }
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                if (line.find_first_not_of(" \t\r\n") != std::string::npos)
                    throw std::invalid_argument("config: malformed line '" + line + "'");
                continue;
            }
            auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r\n");
                const auto e = s.find_last_not_of(" \t\r\n");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            const std::string key = trim(line.substr(0, eq));
            const std::string val = trim(line.substr(eq + 1));
            if (key == "kappas") {
                std::vector<double> ks;
                std::istringstream vs(val);
                std::string tok;
                while (std::getline(vs, tok, ',')) ks.push_back(std::stod(tok));
                kappas = ks;
            } else if (val == "true" || val == "false") {
                set_key(key, val == "true");
            } else {
                set_key(key, std::stod(val));
            }
        }
    }
};

}  // namespace speedscale
