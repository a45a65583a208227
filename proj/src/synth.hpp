#ifndef IPKP_SYNTH_HPP
#define IPKP_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "prototypes.hpp"

namespace ipkp {

// Deterministic handwritten-digit corpus generator. Items are drawn from the
// built-in digit skeletons expanded into a few fixed structural variants per
// class, then put through a per-item chain of node jitter, stroke-width
// variation, affine slant/rotation/scale, blur, ink scaling, and pixel noise.
// Two style presets give a 28x28 training domain and a coarser 16x16 domain
// with a different variant mixture, so models trained on one measurably lose
// accuracy on the other.

// Style of one domain. All coordinates are unit-square; widths are pixels at
// a 28-wide canvas and scale with render_px.
struct DomainStyle {
    int render_px = 28;
    std::vector<double> variant_weights{0.5, 0.3, 0.2};
    double jitter_sd = 0.02;       // per-item node displacement
    double slant_mean = 0.0;       // horizontal shear coefficient
    double slant_sd = 0.12;
    double rotate_sd_deg = 6.0;
    double scale_lo = 0.85, scale_hi = 1.1;
    double translate_frac = 0.06;  // of canvas, each axis
    double stroke_lo = 1.8, stroke_hi = 3.2;
    double blur_sd_lo = 0.3, blur_sd_hi = 0.9;
    double ink_lo = 0.75, ink_hi = 1.0;
    double noise_sd = 0.03;
};

DomainStyle mnist_like_style();
DomainStyle usps_like_style();

struct SynthConfig {
    int train_count = 60000;     // train + validation pool
    int test_count = 10000;
    int ood_train_count = 7291;
    int ood_test_count = 2007;
    uint64_t seed = 0x5EEDC0DEULL;
};

// The per-class structural variants every domain samples from.
std::vector<std::vector<GraphPrototype>> digit_variants(int variants_per_class = 3);

// `count` items of the given style; item i depends only on (seed, i, style).
LabeledDataset generate_digits(int count, uint64_t seed, const DomainStyle& style);

// In-place separable Gaussian blur of a [C, H, W] or [H, W] image.
void blur_gaussian(Tensor& img, double sigma);

// Writes the four IDX files plus the two 16x16 text files into dir, creating
// it if needed. Files that already exist are kept unless force is set.
// Returns true when anything was (re)written.
bool write_demo_corpus(const std::string& dir, const SynthConfig& cfg, bool force = false);

// The file names write_demo_corpus produces; real data in the same layout is
// a drop-in replacement.
struct CorpusPaths {
    std::string train_images, train_labels;
    std::string test_images, test_labels;
    std::string ood_train, ood_test;
    static CorpusPaths in_dir(const std::string& dir);
    bool all_exist() const;
};

// Loads the corpus from dir; throws DataError naming the first missing file.
struct Corpus {
    LabeledDataset train_pool;  // split into train/val downstream
    LabeledDataset test;
    LabeledDataset ood_pool;
    LabeledDataset ood_test;
};

Corpus load_corpus(const std::string& dir);

}  // namespace ipkp

#endif
