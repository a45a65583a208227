#ifndef IPKP_CHECKPOINT_HPP
#define IPKP_CHECKPOINT_HPP

#include <map>
#include <string>

#include "ipkp/model.hpp"

namespace ipkp {

// Canonical one-line text form of a layer stack, e.g.
//   input 1x28x28; conv 6 5x5 s1 p2; tanh; maxpool 2 s2; flatten; dense 10
// Round-trips through arch_from_string.
std::string arch_to_string(const Model& m);
Model arch_from_string(const std::string& text);

struct Checkpoint {
    Model model;
    std::map<std::string, std::string> meta;
};

// Binary container: magic "IPKP", format version, arch string, sorted
// metadata, then one little-endian IEEE-754 f32 blob per parameter tensor.
void save_checkpoint(const std::string& path, const Model& m,
                     const std::map<std::string, std::string>& meta);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ipkp

#endif
