#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "ipkp/rng.hpp"

namespace ipkp {

namespace {

// Weighted pick over non-negative weights (they need not sum to 1).
int pick_weighted(Rng& rng, const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = rng.next_unit() * total;
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
}

Mat3 shear_x(double k) {
    Mat3 m;
    m.m = {1.0, k, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0};
    return m;
}

}  // namespace

DomainStyle mnist_like_style() { return DomainStyle{}; }

DomainStyle usps_like_style() {
    DomainStyle s;
    s.render_px = 16;
    s.variant_weights = {0.15, 0.35, 0.5};
    s.jitter_sd = 0.025;
    s.slant_mean = 0.12;
    s.slant_sd = 0.14;
    s.rotate_sd_deg = 7.0;
    s.scale_lo = 0.8;
    s.scale_hi = 1.12;
    s.translate_frac = 0.07;
    s.stroke_lo = 2.2;
    s.stroke_hi = 3.4;
    s.blur_sd_lo = 0.2;
    s.blur_sd_hi = 0.6;
    s.ink_lo = 0.8;
    s.ink_hi = 1.0;
    s.noise_sd = 0.04;
    return s;
}

std::vector<std::vector<GraphPrototype>> digit_variants(int variants_per_class) {
    if (variants_per_class < 1) throw ConfigError("digit_variants: need at least one variant");
    std::vector<GraphPrototype> base = builtin_digit_prototypes();
    std::vector<std::vector<GraphPrototype>> out(base.size());
    for (size_t c = 0; c < base.size(); ++c) {
        out[c].reserve(static_cast<size_t>(variants_per_class));
        out[c].push_back(base[c]);
        for (int v = 1; v < variants_per_class; ++v) {
            // Each variant is a fixed structural deformation of the class
            // skeleton, independent of the corpus seed so every generated
            // corpus shares the same underlying shapes.
            Rng rng(seed_mix(0xFACEDULL, {static_cast<uint64_t>(c), static_cast<uint64_t>(v)}));
            GraphPrototype g = base[c];
            for (auto& n : g.nodes) {
                n[0] = std::clamp(n[0] + rng.normal() * 0.05f, 0.04f, 0.96f);
                n[1] = std::clamp(n[1] + rng.normal() * 0.05f, 0.04f, 0.96f);
            }
            g.stroke_width *= rng.uniform(0.85f, 1.2f);
            out[c].push_back(std::move(g));
        }
    }
    return out;
}

void blur_gaussian(Tensor& img, double sigma) {
    if (sigma <= 0.0) return;
    int H, W, C = 1;
    if (img.ndim() == 2) {
        H = img.dim(0);
        W = img.dim(1);
    } else if (img.ndim() == 3) {
        C = img.dim(0);
        H = img.dim(1);
        W = img.dim(2);
    } else {
        throw ShapeError("blur_gaussian: expects [H, W] or [C, H, W], got " + img.shape_str());
    }
    int radius = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
    std::vector<float> kernel(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-0.5 * (i / sigma) * (i / sigma));
        kernel[static_cast<size_t>(i + radius)] = static_cast<float>(v);
        sum += v;
    }
    for (auto& k : kernel) k = static_cast<float>(k / sum);
    // Separable passes with zero extension; the background is zero anyway.
    std::vector<float> tmp(static_cast<size_t>(H) * W);
    for (int c = 0; c < C; ++c) {
        float* chan = img.ptr() + static_cast<size_t>(c) * H * W;
        for (int r = 0; r < H; ++r) {
            const float* row = chan + static_cast<size_t>(r) * W;
            float* dst = tmp.data() + static_cast<size_t>(r) * W;
            for (int x = 0; x < W; ++x) {
                float acc = 0.0f;
                for (int k = -radius; k <= radius; ++k) {
                    int xx = x + k;
                    if (xx >= 0 && xx < W) acc += kernel[static_cast<size_t>(k + radius)] * row[xx];
                }
                dst[x] = acc;
            }
        }
        for (int x = 0; x < W; ++x) {
            for (int r = 0; r < H; ++r) {
                float acc = 0.0f;
                for (int k = -radius; k <= radius; ++k) {
                    int rr = r + k;
                    if (rr >= 0 && rr < H) {
                        acc += kernel[static_cast<size_t>(k + radius)] *
                               tmp[static_cast<size_t>(rr) * W + x];
                    }
                }
                chan[static_cast<size_t>(r) * W + x] = acc;
            }
        }
    }
}

LabeledDataset generate_digits(int count, uint64_t seed, const DomainStyle& style) {
    if (count < 1) throw ConfigError("generate_digits: count must be positive");
    if (style.variant_weights.empty()) {
        throw ConfigError("generate_digits: variant_weights must not be empty");
    }
    auto variants = digit_variants(static_cast<int>(style.variant_weights.size()));
    int px = style.render_px;
    Tensor images({count, 1, px, px});
    std::vector<int> labels(static_cast<size_t>(count));
    double cx = (px - 1) / 2.0, cy = (px - 1) / 2.0;
    for (int i = 0; i < count; ++i) {
        // One stream per item, consumed in a fixed order; item i depends only
        // on (seed, i, style).
        Rng rng(seed_mix(seed, {0xD161ULL, static_cast<uint64_t>(i)}));
        int cls = static_cast<int>(rng.below(10));
        int v = pick_weighted(rng, style.variant_weights);
        GraphPrototype g = variants[static_cast<size_t>(cls)][static_cast<size_t>(v)];
        for (auto& n : g.nodes) {
            n[0] = std::clamp(n[0] + rng.normal() * static_cast<float>(style.jitter_sd), 0.01f,
                              0.99f);
            n[1] = std::clamp(n[1] + rng.normal() * static_cast<float>(style.jitter_sd), 0.01f,
                              0.99f);
        }
        float stroke = rng.uniform(static_cast<float>(style.stroke_lo),
                                   static_cast<float>(style.stroke_hi));
        g.stroke_width = stroke * (g.stroke_width / 2.4f) * (px / 28.0f);
        Tensor img = render_graph(g, px, px);

        double theta = rng.normal() * style.rotate_sd_deg * (3.14159265358979323846 / 180.0);
        double slant = style.slant_mean + rng.normal() * style.slant_sd;
        double s = rng.uniform(static_cast<float>(style.scale_lo),
                               static_cast<float>(style.scale_hi));
        double tx = rng.uniform(-1.0f, 1.0f) * style.translate_frac * px;
        double ty = rng.uniform(-1.0f, 1.0f) * style.translate_frac * px;
        Mat3 fwd = Mat3::translation(cx + tx, cy + ty) * Mat3::rotation(theta) * shear_x(slant) *
                   Mat3::scaling(s, s) * Mat3::translation(-cx, -cy);
        img = warp_bilinear(img, fwd.inverse());

        blur_gaussian(img, rng.uniform(static_cast<float>(style.blur_sd_lo),
                                       static_cast<float>(style.blur_sd_hi)));
        float ink = rng.uniform(static_cast<float>(style.ink_lo), static_cast<float>(style.ink_hi));
        float* dst = images.ptr() + static_cast<size_t>(i) * px * px;
        for (int j = 0; j < px * px; ++j) {
            float val = img.data[static_cast<size_t>(j)] * ink +
                        rng.normal() * static_cast<float>(style.noise_sd);
            dst[j] = std::clamp(val, 0.0f, 1.0f);
        }
        labels[static_cast<size_t>(i)] = cls;
    }
    return LabeledDataset(std::move(images), std::move(labels));
}

CorpusPaths CorpusPaths::in_dir(const std::string& dir) {
    CorpusPaths p;
    p.train_images = dir + "/train-images-idx3-ubyte";
    p.train_labels = dir + "/train-labels-idx1-ubyte";
    p.test_images = dir + "/t10k-images-idx3-ubyte";
    p.test_labels = dir + "/t10k-labels-idx1-ubyte";
    p.ood_train = dir + "/usps_train.txt";
    p.ood_test = dir + "/usps_test.txt";
    return p;
}

bool CorpusPaths::all_exist() const {
    namespace fs = std::filesystem;
    for (const std::string* p : {&train_images, &train_labels, &test_images, &test_labels,
                                 &ood_train, &ood_test}) {
        if (!fs::exists(*p)) return false;
    }
    return true;
}

bool write_demo_corpus(const std::string& dir, const SynthConfig& cfg, bool force) {
    namespace fs = std::filesystem;
    CorpusPaths paths = CorpusPaths::in_dir(dir);
    if (!force && paths.all_exist()) return false;
    fs::create_directories(dir);
    LabeledDataset train = generate_digits(cfg.train_count, seed_mix(cfg.seed, {1}),
                                           mnist_like_style());
    write_idx(paths.train_images, paths.train_labels, train);
    LabeledDataset test =
        generate_digits(cfg.test_count, seed_mix(cfg.seed, {2}), mnist_like_style());
    write_idx(paths.test_images, paths.test_labels, test);
    LabeledDataset ood_train =
        generate_digits(cfg.ood_train_count, seed_mix(cfg.seed, {3}), usps_like_style());
    write_usps(paths.ood_train, ood_train);
    LabeledDataset ood_test =
        generate_digits(cfg.ood_test_count, seed_mix(cfg.seed, {4}), usps_like_style());
    write_usps(paths.ood_test, ood_test);
    return true;
}

Corpus load_corpus(const std::string& dir) {
    namespace fs = std::filesystem;
    CorpusPaths paths = CorpusPaths::in_dir(dir);
    for (const std::string* p : {&paths.train_images, &paths.train_labels, &paths.test_images,
                                 &paths.test_labels, &paths.ood_train, &paths.ood_test}) {
        if (!fs::exists(*p)) {
            throw DataError("corpus incomplete under " + dir + ": missing " + *p +
                            " (generate the demo corpus or point at real data)");
        }
    }
    Corpus c;
    c.train_pool = load_idx(paths.train_images, paths.train_labels);
    c.test = load_idx(paths.test_images, paths.test_labels);
    c.ood_pool = load_usps(paths.ood_train);
    c.ood_test = load_usps(paths.ood_test);
    return c;
}

}  // namespace ipkp
