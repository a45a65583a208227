#include "prototypes.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ipkp/rng.hpp"

namespace ipkp {

namespace {

// Squared distance from p to segment ab. Everything in doubles: together with
// the centered pixel coordinates this keeps the render of a mirrored graph a
// bit-exact mirror image.
double seg_dist2(double px, double py, double ax, double ay, double bx, double by) {
    double dx = bx - ax, dy = by - ay;
    double vv = dx * dx + dy * dy;
    double t = 0.0;
    if (vv > 0.0) {
        t = ((px - ax) * dx + (py - ay) * dy) / vv;
        t = std::clamp(t, 0.0, 1.0);
    }
    double qx = (ax + t * dx) - px;
    double qy = (ay + t * dy) - py;
    return qx * qx + qy * qy;
}

void validate_graph(const GraphPrototype& g) {
    if (g.nodes.empty()) throw DataError(strprintf("prototype for class %d has no nodes", g.label));
    if (g.edges.empty()) throw DataError(strprintf("prototype for class %d has no edges", g.label));
    if (!(g.stroke_width > 0)) {
        throw DataError(strprintf("prototype for class %d: stroke width %g must be positive",
                                  g.label, g.stroke_width));
    }
    for (const auto& e : g.edges) {
        for (int end : e) {
            if (end < 0 || end >= static_cast<int>(g.nodes.size())) {
                throw DataError(strprintf("prototype for class %d: edge end %d outside %zu nodes",
                                          g.label, end, g.nodes.size()));
            }
        }
    }
}

}  // namespace

Tensor render_graph(const GraphPrototype& g, int h, int w) {
    if (h < 1 || w < 1) throw ShapeError(strprintf("render_graph: bad canvas %d x %d", h, w));
    validate_graph(g);
    size_t nn = g.nodes.size();
    std::vector<double> nx(nn), ny(nn);
    double aspect = static_cast<double>(h) / static_cast<double>(w);
    for (size_t i = 0; i < nn; ++i) {
        nx[i] = static_cast<double>(g.nodes[i][0]) - 0.5;
        ny[i] = (static_cast<double>(g.nodes[i][1]) - 0.5) * aspect;
    }
    double half = 0.5 * static_cast<double>(g.stroke_width) / w;
    double falloff = 1.0 / w;
    Tensor out({1, h, w});
    for (int r = 0; r < h; ++r) {
        double v = (2.0 * r + 1.0 - h) / (2.0 * w);
        float* row = out.ptr() + static_cast<size_t>(r) * w;
        for (int c = 0; c < w; ++c) {
            double u = (2.0 * c + 1.0 - w) / (2.0 * w);
            double best = 0.0;
            for (const auto& e : g.edges) {
                double d = std::sqrt(seg_dist2(u, v, nx[static_cast<size_t>(e[0])],
                                               ny[static_cast<size_t>(e[0])],
                                               nx[static_cast<size_t>(e[1])],
                                               ny[static_cast<size_t>(e[1])]));
                double inten;
                if (d <= half) {
                    inten = 1.0;
                } else if (d >= half + falloff) {
                    inten = 0.0;
                } else {
                    inten = (half + falloff - d) * w;
                }
                best = std::max(best, inten);
            }
            row[c] = static_cast<float>(best);
        }
    }
    return out;
}

PrototypeSet render_prototypes(const std::vector<GraphPrototype>& protos, int h, int w) {
    if (protos.empty()) throw DataError("render_prototypes: empty prototype list");
    Tensor images({static_cast<int>(protos.size()), 1, h, w});
    std::vector<int> labels(protos.size());
    for (size_t i = 0; i < protos.size(); ++i) {
        Tensor img = render_graph(protos[i], h, w);
        std::memcpy(images.ptr() + static_cast<int64_t>(i) * h * w, img.ptr(),
                    static_cast<size_t>(h) * w * sizeof(float));
        labels[i] = protos[i].label;
    }
    PrototypeSet set;
    set.items = {std::move(images), std::move(labels)};
    return set;
}

std::vector<GraphPrototype> parse_graph_prototypes(const std::string& text,
                                                   const std::string& origin) {
    std::vector<GraphPrototype> out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& why) {
        return DataError(strprintf("%s:%d: %s", origin.c_str(), line_no, why.c_str()));
    };
    while (std::getline(in, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) continue;
        if (word == "class") {
            int label = -1;
            if (!(ls >> label) || label < 0 || label > 9) {
                throw fail("'class' needs a digit label 0-9");
            }
            out.emplace_back();
            out.back().label = label;
        } else if (out.empty()) {
            throw fail("'" + word + "' before any 'class' directive");
        } else if (word == "width") {
            float width = 0;
            if (!(ls >> width) || !(width > 0)) throw fail("'width' needs a positive pixel value");
            out.back().stroke_width = width;
        } else if (word == "node") {
            float x = 0, y = 0;
            if (!(ls >> x >> y)) throw fail("'node' needs x and y");
            if (x < 0 || x > 1 || y < 0 || y > 1) {
                throw fail(strprintf("node (%g, %g) outside the unit square", x, y));
            }
            out.back().nodes.push_back({x, y});
        } else if (word == "stroke") {
            std::vector<int> idx;
            int i = 0;
            while (ls >> i) idx.push_back(i);
            if (idx.size() < 2) throw fail("'stroke' needs at least two node indices");
            int nn = static_cast<int>(out.back().nodes.size());
            for (int k : idx) {
                if (k < 0 || k >= nn) {
                    throw fail(strprintf("stroke references node %d of %d", k, nn));
                }
            }
            for (size_t k = 0; k + 1 < idx.size(); ++k) {
                out.back().edges.push_back({idx[k], idx[k + 1]});
            }
        } else {
            throw fail("unknown directive '" + word + "'");
        }
    }
    if (out.empty()) throw DataError(origin + ": no prototypes found");
    for (const auto& g : out) validate_graph(g);
    return out;
}

std::vector<GraphPrototype> load_graph_prototypes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_graph_prototypes(ss.str(), path);
}

const char* builtin_digit_prototype_text() {
    return R"(# Stroke-graph skeletons for the ten digit classes.
# Coordinates are in the unit square (x right, y down); width is in output
# pixels for a 28-wide canvas.

class 0
width 2.4
node 0.5000 0.1800
node 0.6000 0.2229
node 0.6732 0.3400
node 0.7000 0.5000
node 0.6732 0.6600
node 0.6000 0.7771
node 0.5000 0.8200
node 0.4000 0.7771
node 0.3268 0.6600
node 0.3000 0.5000
node 0.3268 0.3400
node 0.4000 0.2229
stroke 0 1 2 3 4 5 6 7 8 9 10 11 0

class 1
width 2.4
node 0.4200 0.2800
node 0.5600 0.1600
node 0.5600 0.8500
stroke 0 1 2

class 2
width 2.4
node 0.3000 0.3000
node 0.3600 0.1900
node 0.5000 0.1500
node 0.6400 0.1900
node 0.7000 0.3000
node 0.6600 0.4200
node 0.3000 0.8500
node 0.7200 0.8500
stroke 0 1 2 3 4 5 6 7

class 3
width 2.4
node 0.3200 0.2200
node 0.4500 0.1500
node 0.6000 0.1700
node 0.6800 0.2700
node 0.6200 0.4000
node 0.4800 0.4700
node 0.6400 0.5200
node 0.7000 0.6500
node 0.6200 0.8000
node 0.4500 0.8600
node 0.3200 0.7800
stroke 0 1 2 3 4 5
stroke 5 6 7 8 9 10

class 4
width 2.4
node 0.3500 0.1500
node 0.3000 0.5800
node 0.7500 0.5800
node 0.6200 0.3000
node 0.6200 0.8500
stroke 0 1 2
stroke 3 4

class 5
width 2.4
node 0.6800 0.1500
node 0.3500 0.1500
node 0.3300 0.4500
node 0.5000 0.4200
node 0.6500 0.5000
node 0.6800 0.6500
node 0.6000 0.8000
node 0.4200 0.8500
node 0.3000 0.7800
stroke 0 1 2 3 4 5 6 7 8

class 6
width 2.4
node 0.6200 0.1200
node 0.4500 0.2500
node 0.3500 0.4500
node 0.3300 0.6500
node 0.4200 0.8200
node 0.5800 0.8400
node 0.6800 0.7200
node 0.6600 0.5600
node 0.5200 0.5000
node 0.3700 0.5800
stroke 0 1 2 3 4 5 6 7 8 9

class 7
width 2.4
node 0.2800 0.1800
node 0.7200 0.1800
node 0.5500 0.5000
node 0.4500 0.8500
stroke 0 1 2 3

class 8
width 2.4
node 0.5000 0.1600
node 0.5920 0.2010
node 0.6300 0.3000
node 0.5920 0.3990
node 0.5000 0.4400
node 0.4080 0.3990
node 0.3700 0.3000
node 0.4080 0.2010
node 0.5000 0.4700
node 0.6200 0.5260
node 0.6700 0.6600
node 0.6200 0.7940
node 0.5000 0.8500
node 0.3800 0.7940
node 0.3300 0.6600
node 0.3800 0.5260
stroke 0 1 2 3 4 5 6 7 0
stroke 8 9 10 11 12 13 14 15 8

class 9
width 2.4
node 0.5000 0.1600
node 0.6130 0.2100
node 0.6600 0.3300
node 0.6130 0.4500
node 0.5000 0.5000
node 0.3870 0.4500
node 0.3400 0.3300
node 0.3870 0.2100
node 0.6400 0.6000
node 0.5500 0.8500
stroke 0 1 2 3 4 5 6 7 0
stroke 2 8 9
)";
}

std::vector<GraphPrototype> builtin_digit_prototypes() {
    auto protos = parse_graph_prototypes(builtin_digit_prototype_text(), "<builtin>");
    if (protos.size() != 10) {
        throw DataError(strprintf("builtin prototypes: expected 10 classes, found %zu",
                                  protos.size()));
    }
    for (int c = 0; c < 10; ++c) {
        if (protos[static_cast<size_t>(c)].label != c) {
            throw DataError(strprintf("builtin prototypes: position %d holds class %d", c,
                                      protos[static_cast<size_t>(c)].label));
        }
    }
    return protos;
}

PrototypeSet sample_prototypes(const LabeledDataset& ds, int per_class, uint64_t seed,
                               int num_classes) {
    PrototypeSet set;
    set.items = stratified_subsample_count(ds, per_class, seed, num_classes);
    // Class-major order so augmentation blocks line up predictably.
    std::vector<int> order(static_cast<size_t>(set.items.size()));
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return set.items.labels[static_cast<size_t>(a)] < set.items.labels[static_cast<size_t>(b)];
    });
    set.items = take(set.items, order);
    return set;
}

PrototypeSet mean_image_prototypes(const LabeledDataset& ds, int num_classes) {
    PrototypeSet set;
    set.items = mean_image_per_class(ds, num_classes);
    return set;
}

void AugmentationConfig::validate() const {
    if (copies < 1) throw ConfigError(strprintf("augment: copies must be >= 1, got %d", copies));
    if (!(scale_lo > 0) || !(scale_hi >= scale_lo)) {
        throw ConfigError(strprintf("augment: bad scale range [%g, %g]", scale_lo, scale_hi));
    }
    if (translate_frac < 0 || translate_frac > 0.5f) {
        throw ConfigError(strprintf("augment: translate fraction %g outside [0, 0.5]",
                                    translate_frac));
    }
    if (rotate_deg < 0 || rotate_deg > 90) {
        throw ConfigError(strprintf("augment: rotation %g degrees outside [0, 90]", rotate_deg));
    }
    if (corner_jitter_frac < 0 || corner_jitter_frac > 0.4f) {
        throw ConfigError(strprintf("augment: corner jitter %g outside [0, 0.4]",
                                    corner_jitter_frac));
    }
}

AugmentationConfig::Kind augmentation_kind_from(const std::string& s) {
    if (s == "affine") return AugmentationConfig::Kind::Affine;
    if (s == "perspective") return AugmentationConfig::Kind::Perspective;
    throw ConfigError("unknown augmentation kind '" + s + "' (expected affine or perspective)");
}

const char* augmentation_kind_name(AugmentationConfig::Kind k) {
    return k == AugmentationConfig::Kind::Affine ? "affine" : "perspective";
}

Mat3 Mat3::translation(double tx, double ty) {
    Mat3 t;
    t.m = {1, 0, tx, 0, 1, ty, 0, 0, 1};
    return t;
}

Mat3 Mat3::rotation(double radians) {
    double c = std::cos(radians), s = std::sin(radians);
    Mat3 t;
    t.m = {c, -s, 0, s, c, 0, 0, 0, 1};
    return t;
}

Mat3 Mat3::scaling(double sx, double sy) {
    Mat3 t;
    t.m = {sx, 0, 0, 0, sy, 0, 0, 0, 1};
    return t;
}

Mat3 Mat3::operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double acc = 0;
            for (int k = 0; k < 3; ++k) acc += m[static_cast<size_t>(i * 3 + k)] * o.m[static_cast<size_t>(k * 3 + j)];
            r.m[static_cast<size_t>(i * 3 + j)] = acc;
        }
    }
    return r;
}

Mat3 Mat3::inverse() const {
    const auto& a = m;
    double c00 = a[4] * a[8] - a[5] * a[7];
    double c01 = a[5] * a[6] - a[3] * a[8];
    double c02 = a[3] * a[7] - a[4] * a[6];
    double det = a[0] * c00 + a[1] * c01 + a[2] * c02;
    if (std::abs(det) < 1e-12) throw Error("Mat3::inverse: singular matrix");
    double inv = 1.0 / det;
    Mat3 r;
    r.m = {c00 * inv,
           (a[2] * a[7] - a[1] * a[8]) * inv,
           (a[1] * a[5] - a[2] * a[4]) * inv,
           c01 * inv,
           (a[0] * a[8] - a[2] * a[6]) * inv,
           (a[2] * a[3] - a[0] * a[5]) * inv,
           c02 * inv,
           (a[1] * a[6] - a[0] * a[7]) * inv,
           (a[0] * a[4] - a[1] * a[3]) * inv};
    return r;
}

std::array<double, 2> Mat3::apply(double x, double y) const {
    double w = m[6] * x + m[7] * y + m[8];
    if (std::abs(w) < 1e-12) throw Error("Mat3::apply: point at infinity");
    return {(m[0] * x + m[1] * y + m[2]) / w, (m[3] * x + m[4] * y + m[5]) / w};
}

Mat3 unit_square_to_quad(const std::array<std::array<double, 2>, 4>& quad) {
    double x0 = quad[0][0], y0 = quad[0][1];
    double x1 = quad[1][0], y1 = quad[1][1];
    double x2 = quad[2][0], y2 = quad[2][1];
    double x3 = quad[3][0], y3 = quad[3][1];
    double sx = x0 - x1 + x2 - x3;
    double sy = y0 - y1 + y2 - y3;
    Mat3 t;
    if (std::abs(sx) < 1e-12 && std::abs(sy) < 1e-12) {
        // Parallelogram: plain affine.
        t.m = {x1 - x0, x3 - x0, x0, y1 - y0, y3 - y0, y0, 0, 0, 1};
        return t;
    }
    double dx1 = x1 - x2, dx2 = x3 - x2;
    double dy1 = y1 - y2, dy2 = y3 - y2;
    double den = dx1 * dy2 - dy1 * dx2;
    if (std::abs(den) < 1e-12) throw Error("unit_square_to_quad: degenerate quad");
    double g = (sx * dy2 - sy * dx2) / den;
    double h = (sy * dx1 - sx * dy1) / den;
    t.m = {x1 - x0 + g * x1, x3 - x0 + h * x3, x0,
           y1 - y0 + g * y1, y3 - y0 + h * y3, y0,
           g, h, 1};
    return t;
}

Tensor warp_bilinear(const Tensor& src, const Mat3& out_to_src) {
    if (src.ndim() != 3) {
        throw ShapeError("warp_bilinear: expects a [C, H, W] image, got " + src.shape_str());
    }
    int C = src.dim(0), H = src.dim(1), W = src.dim(2);
    Tensor out({C, H, W});
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            auto [sx, sy] = out_to_src.apply(c, r);
            int x0 = static_cast<int>(std::floor(sx));
            int y0 = static_cast<int>(std::floor(sy));
            double fx = sx - x0, fy = sy - y0;
            for (int ch = 0; ch < C; ++ch) {
                const float* plane = src.ptr() + static_cast<size_t>(ch) * H * W;
                auto at = [&](int y, int x) -> double {
                    if (x < 0 || x >= W || y < 0 || y >= H) return 0.0;
                    return plane[static_cast<size_t>(y) * W + x];
                };
                double top = (1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1);
                double bot = (1.0 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1);
                out.ptr()[(static_cast<size_t>(ch) * H + r) * W + c] =
                    static_cast<float>((1.0 - fy) * top + fy * bot);
            }
        }
    }
    return out;
}

PrototypeSet augment(const PrototypeSet& protos, const AugmentationConfig& cfg, uint64_t seed) {
    cfg.validate();
    const LabeledDataset& src = protos.items;
    if (src.size() == 0) throw DataError("augment: empty prototype set");
    int H = src.height(), W = src.width(), C = src.channels();
    Tensor images({src.size() * cfg.copies, C, H, W});
    std::vector<int> labels(static_cast<size_t>(src.size()) * cfg.copies);
    int64_t item = src.item_size();
    double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0;
    for (int i = 0; i < src.size(); ++i) {
        Tensor one({C, H, W});
        std::memcpy(one.ptr(), src.item(i), static_cast<size_t>(item) * sizeof(float));
        for (int j = 0; j < cfg.copies; ++j) {
            float* dst = images.ptr() + (static_cast<int64_t>(i) * cfg.copies + j) * item;
            labels[static_cast<size_t>(i) * cfg.copies + j] = src.labels[static_cast<size_t>(i)];
            if (j == 0) {
                std::memcpy(dst, one.ptr(), static_cast<size_t>(item) * sizeof(float));
                continue;
            }
            Rng rng(seed_mix(seed, {static_cast<uint64_t>(i), static_cast<uint64_t>(j)}));
            Mat3 out_to_src;
            if (cfg.kind == AugmentationConfig::Kind::Affine) {
                double s = rng.uniform(cfg.scale_lo, cfg.scale_hi);
                double theta = rng.uniform(-cfg.rotate_deg, cfg.rotate_deg) * 3.14159265358979323846 / 180.0;
                double tx = rng.uniform(-cfg.translate_frac, cfg.translate_frac) * W;
                double ty = rng.uniform(-cfg.translate_frac, cfg.translate_frac) * H;
                Mat3 fwd = Mat3::translation(cx + tx, cy + ty) * Mat3::rotation(theta) *
                           Mat3::scaling(s, s) * Mat3::translation(-cx, -cy);
                out_to_src = fwd.inverse();
            } else {
                std::array<std::array<double, 2>, 4> quad{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
                for (auto& corner : quad) {
                    corner[0] += rng.uniform(-cfg.corner_jitter_frac, cfg.corner_jitter_frac);
                    corner[1] += rng.uniform(-cfg.corner_jitter_frac, cfg.corner_jitter_frac);
                }
                Mat3 h = unit_square_to_quad(quad);
                out_to_src = Mat3::translation(-0.5, -0.5) * Mat3::scaling(W, H) * h *
                             Mat3::scaling(1.0 / W, 1.0 / H) * Mat3::translation(0.5, 0.5);
            }
            Tensor warped = warp_bilinear(one, out_to_src);
            std::memcpy(dst, warped.ptr(), static_cast<size_t>(item) * sizeof(float));
        }
    }
    PrototypeSet out;
    out.items = {std::move(images), std::move(labels)};
    return out;
}

}  // namespace ipkp
