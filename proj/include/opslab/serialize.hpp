#pragma once

#include <string>

#include "opslab/mdp.hpp"

namespace opslab {

// JSON (de)serialization for the core types. Datasets use JSON Lines, one
// trajectory per line:
//   {"episode": i, "steps": [{"h":0,"s":[0,3],"a":1,"r":0.0,"sp":[1,2],"pb":0.25}, ...]}
// States are written as [layer, index] pairs.

std::string mdp_to_json(const Mdp& mdp);
Mdp mdp_from_json(const std::string& text);
void save_mdp(const Mdp& mdp, const std::string& path);
Mdp load_mdp(const std::string& path);

std::string policy_to_json(const Policy& pi);
Policy policy_from_json(const std::string& text);
void save_policy(const Policy& pi, const std::string& path);
Policy load_policy(const std::string& path);

void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace opslab
