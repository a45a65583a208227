#include "checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "wire.hpp"

namespace ipkp {

namespace {
constexpr char kMagic[4] = {'I', 'P', 'K', 'P'};
constexpr uint32_t kVersion = 1;
}  // namespace

std::string arch_to_string(const Model& m) {
    std::ostringstream os;
    os << "input " << m.input_shape[0] << 'x' << m.input_shape[1] << 'x' << m.input_shape[2];
    for (const auto& l : m.layers) {
        os << "; ";
        switch (l.kind) {
            case LayerKind::Conv2D:
                os << "conv " << l.out_channels << ' ' << l.kernel_h << 'x' << l.kernel_w << " s"
                   << l.stride << " p" << l.padding;
                break;
            case LayerKind::MaxPool:
                os << "maxpool " << l.window << " s" << l.pool_stride;
                break;
            case LayerKind::ReLU: os << "relu"; break;
            case LayerKind::Tanh: os << "tanh"; break;
            case LayerKind::Flatten: os << "flatten"; break;
            case LayerKind::Dense: os << "dense " << l.out_features; break;
        }
    }
    return os.str();
}

Model arch_from_string(const std::string& text) {
    Model m;
    m.layers.clear();
    std::stringstream ss(text);
    std::string part;
    bool saw_input = false;
    while (std::getline(ss, part, ';')) {
        std::istringstream ps(part);
        std::string word;
        if (!(ps >> word)) continue;
        auto bad = [&](const std::string& why) {
            return ConfigError("arch: cannot parse '" + part + "': " + why);
        };
        if (word == "input") {
            char x1 = 0, x2 = 0;
            int c = 0, h = 0, w = 0;
            if (!(ps >> c >> x1 >> h >> x2 >> w) || x1 != 'x' || x2 != 'x') {
                throw bad("expected input CxHxW");
            }
            m.input_shape = {c, h, w};
            saw_input = true;
        } else if (word == "conv") {
            int oc = 0, kh = 0, kw = 0;
            char x = 0;
            std::string stok, ptok;
            if (!(ps >> oc >> kh >> x >> kw >> stok >> ptok) || x != 'x' || stok.size() < 2 ||
                ptok.size() < 2 || stok[0] != 's' || ptok[0] != 'p') {
                throw bad("expected conv OC KHxKW sS pP");
            }
            m.layers.push_back(Layer::conv2d(oc, kh, std::stoi(stok.substr(1)),
                                             std::stoi(ptok.substr(1))));
            m.layers.back().kernel_w = kw;
        } else if (word == "maxpool") {
            int win = 0;
            std::string stok;
            if (!(ps >> win >> stok) || stok.size() < 2 || stok[0] != 's') {
                throw bad("expected maxpool W sS");
            }
            m.layers.push_back(Layer::max_pool(win, std::stoi(stok.substr(1))));
        } else if (word == "relu") {
            m.layers.push_back(Layer::relu());
        } else if (word == "tanh") {
            m.layers.push_back(Layer::tanh());
        } else if (word == "flatten") {
            m.layers.push_back(Layer::flatten());
        } else if (word == "dense") {
            int f = 0;
            if (!(ps >> f)) throw bad("expected dense F");
            m.layers.push_back(Layer::dense(f));
        } else {
            throw bad("unknown layer kind '" + word + "'");
        }
    }
    if (!saw_input) throw ConfigError("arch: missing leading 'input CxHxW' in '" + text + "'");
    if (m.layers.empty() || m.layers.back().kind != LayerKind::Dense) {
        throw ConfigError("arch: stack must end in a dense layer: '" + text + "'");
    }
    m.num_classes = m.layers.back().out_features;
    bind_params(m);
    return m;
}

void save_checkpoint(const std::string& path, const Model& m,
                     const std::map<std::string, std::string>& meta) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os.write(kMagic, 4);
    wire::put_u32(os, kVersion);
    wire::put_str(os, arch_to_string(m));
    wire::put_u32(os, static_cast<uint32_t>(meta.size()));
    for (const auto& [k, v] : meta) {
        wire::put_str(os, k);
        wire::put_str(os, v);
    }
    auto idx = m.param_layer_indices();
    wire::put_u32(os, static_cast<uint32_t>(idx.size()));
    for (int i : idx) {
        const auto& l = m.layers[static_cast<size_t>(i)];
        wire::put_u32(os, static_cast<uint32_t>(i));
        wire::put_u64(os, static_cast<uint64_t>(l.weight.size()));
        wire::put_f32_blob(os, l.weight.data);
        wire::put_u64(os, static_cast<uint64_t>(l.bias.size()));
        wire::put_f32_blob(os, l.bias.data);
    }
    if (!os) throw DataError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    wire::Reader r(path);
    char magic[4];
    r.need(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError(path + ": not a checkpoint file (bad magic)");
    }
    uint32_t version = r.u32("version");
    if (version != kVersion) {
        throw DataError(strprintf("%s: unsupported checkpoint version %u", path.c_str(), version));
    }
    Checkpoint cp;
    cp.model = arch_from_string(r.str("arch"));
    uint32_t n_meta = r.u32("metadata count");
    for (uint32_t i = 0; i < n_meta; ++i) {
        std::string k = r.str("metadata key");
        cp.meta[k] = r.str("metadata value");
    }
    uint32_t n_params = r.u32("parameter count");
    auto idx = cp.model.param_layer_indices();
    if (n_params != idx.size()) {
        throw DataError(strprintf("%s: %u parameter blocks for an arch with %zu", path.c_str(),
                                  n_params, idx.size()));
    }
    for (uint32_t i = 0; i < n_params; ++i) {
        uint32_t li = r.u32("layer index");
        if (li >= cp.model.layers.size() || !cp.model.layers[li].has_params()) {
            throw DataError(strprintf("%s: parameter block names layer %u which has no parameters",
                                      path.c_str(), li));
        }
        auto& l = cp.model.layers[li];
        uint64_t wn = r.u64("weight count");
        if (wn != static_cast<uint64_t>(l.weight.size())) {
            throw DataError(strprintf("%s: layer %u weight count %llu does not match arch (%lld)",
                                      path.c_str(), li, static_cast<unsigned long long>(wn),
                                      static_cast<long long>(l.weight.size())));
        }
        r.f32_blob(l.weight.data, "weights");
        uint64_t bn = r.u64("bias count");
        if (bn != static_cast<uint64_t>(l.bias.size())) {
            throw DataError(strprintf("%s: layer %u bias count %llu does not match arch (%lld)",
                                      path.c_str(), li, static_cast<unsigned long long>(bn),
                                      static_cast<long long>(l.bias.size())));
        }
        r.f32_blob(l.bias.data, "biases");
    }
    return cp;
}

}  // namespace ipkp
