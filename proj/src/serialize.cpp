#include "opslab/serialize.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace opslab {

using nlohmann::json;

namespace {

json reward_to_json(const RewardDist& rd) {
    return json{{"values", rd.values}, {"probs", rd.probs}};
}

RewardDist reward_from_json(const json& j) {
    RewardDist rd;
    rd.values = j.at("values").get<std::vector<double>>();
    rd.probs = j.at("probs").get<std::vector<double>>();
    return rd;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string mdp_to_json(const Mdp& mdp) {
    json j;
    j["horizon"] = mdp.horizon;
    j["num_actions"] = mdp.num_actions;
    j["states_per_layer"] = mdp.states_per_layer;
    j["initial_state"] = mdp.initial_state;
    j["r_max"] = mdp.r_max;
    j["transition"] = mdp.transition;
    json rew = json::array();
    for (const auto& layer : mdp.reward) {
        json jl = json::array();
        for (const auto& row : layer) {
            json jr = json::array();
            for (const auto& rd : row) jr.push_back(reward_to_json(rd));
            jl.push_back(std::move(jr));
        }
        rew.push_back(std::move(jl));
    }
    j["reward"] = std::move(rew);
    j["metadata"] = mdp.metadata;
    return j.dump(2);
}

Mdp mdp_from_json(const std::string& text) {
    json j = json::parse(text);
    Mdp mdp;
    mdp.horizon = j.at("horizon").get<int>();
    mdp.num_actions = j.at("num_actions").get<int>();
    mdp.states_per_layer = j.at("states_per_layer").get<std::vector<int>>();
    mdp.initial_state = j.at("initial_state").get<int>();
    mdp.r_max = j.at("r_max").get<double>();
    mdp.transition =
        j.at("transition").get<std::vector<std::vector<std::vector<std::vector<double>>>>>();
    for (const auto& jl : j.at("reward")) {
        std::vector<std::vector<RewardDist>> layer;
        for (const auto& jr : jl) {
            std::vector<RewardDist> row;
            for (const auto& jd : jr) row.push_back(reward_from_json(jd));
            layer.push_back(std::move(row));
        }
        mdp.reward.push_back(std::move(layer));
    }
    if (j.contains("metadata"))
        mdp.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    mdp.validate();
    return mdp;
}

void save_mdp(const Mdp& mdp, const std::string& path) { write_file(path, mdp_to_json(mdp)); }
Mdp load_mdp(const std::string& path) { return mdp_from_json(read_file(path)); }

std::string policy_to_json(const Policy& pi) {
    json j;
    j["action_probs"] = pi.probs;
    return j.dump(2);
}

Policy policy_from_json(const std::string& text) {
    json j = json::parse(text);
    Policy pi;
    pi.probs = j.at("action_probs").get<std::vector<std::vector<std::vector<double>>>>();
    return pi;
}

void save_policy(const Policy& pi, const std::string& path) { write_file(path, policy_to_json(pi)); }
Policy load_policy(const std::string& path) { return policy_from_json(read_file(path)); }

void save_dataset(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
        json steps = json::array();
        for (const Step& st : data.trajectories[i].steps) {
            steps.push_back(json{{"h", st.h},
                                 {"s", json::array({st.h, st.s})},
                                 {"a", st.a},
                                 {"r", st.r},
                                 {"sp", json::array({st.h + 1, st.sp})},
                                 {"pb", st.pb}});
        }
        json line{{"episode", i}, {"steps", std::move(steps)}};
        out << line.dump() << "\n";
    }
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    Dataset data;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        Trajectory traj;
        for (const auto& js : j.at("steps")) {
            Step st;
            st.h = js.at("h").get<int>();
            st.s = js.at("s").at(1).get<int>();
            st.a = js.at("a").get<int>();
            st.r = js.at("r").get<double>();
            st.sp = js.at("sp").at(1).get<int>();
            st.pb = js.at("pb").get<double>();
            traj.steps.push_back(st);
        }
        data.trajectories.push_back(std::move(traj));
    }
    if (!data.trajectories.empty()) {
        data.horizon = static_cast<int>(data.trajectories[0].steps.size());
        int max_a = 0;
        for (const auto& traj : data.trajectories)
            for (const Step& st : traj.steps) max_a = std::max(max_a, st.a);
        data.num_actions = max_a + 1;
    }
    data.validate();
    return data;
}

}  // namespace opslab
