#ifndef IPKP_DATASET_HPP
#define IPKP_DATASET_HPP

#include <string>
#include <utility>
#include <vector>

#include "ipkp/tensor.hpp"

namespace ipkp {

// Images are [N, C, H, W] floats in [0, 1]; labels[i] in [0, num_classes).
struct LabeledDataset {
    Tensor images;
    std::vector<int> labels;

    LabeledDataset() : images({1, 1, 1, 1}) {}
    LabeledDataset(Tensor imgs, std::vector<int> labs)
        : images(std::move(imgs)), labels(std::move(labs)) {}

    int size() const { return labels.empty() ? 0 : images.dim(0); }
    int channels() const { return images.dim(1); }
    int height() const { return images.dim(2); }
    int width() const { return images.dim(3); }
    int64_t item_size() const { return images.size() / images.dim(0); }
    const float* item(int i) const { return images.ptr() + static_cast<int64_t>(i) * item_size(); }
    float* item(int i) { return images.ptr() + static_cast<int64_t>(i) * item_size(); }
};

// Number of items per label value (indexable by class).
std::vector<int> class_counts(const LabeledDataset& ds, int num_classes = 10);

// New dataset holding rows[i] = ds[indices[i]].
LabeledDataset take(const LabeledDataset& ds, const std::vector<int>& indices);

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b);

// IDX image/label file pair (the byte-level format MNIST ships in: big-endian
// magic 0x00000803 / 0x00000801, then dims, then raw u8 payload). Pixels are
// scaled to [0, 1].
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const std::string& images_path, const std::string& labels_path,
               const LabeledDataset& ds);

// Text rows of "<label> <v1> ... <v256>": one 16x16 image per line with values
// in [-1, 1]. Images are rescaled to [0, 1] and bilinearly resized to
// target_h x target_w (the native resolution is kept when both are 16).
LabeledDataset load_usps(const std::string& path, int target_h = 28, int target_w = 28);
void write_usps(const std::string& path, const LabeledDataset& ds);

// Single-channel bilinear resize with half-pixel centers.
std::vector<float> resize_bilinear(const float* src, int h, int w, int out_h, int out_w);

// Class-stratified subset of round(fraction * N) items: per-class quotas by
// largest remainder (each class within one item of exact proportionality),
// then a seeded within-class draw and a final shuffle.
LabeledDataset stratified_subsample(const LabeledDataset& ds, double fraction, uint64_t seed,
                                    int num_classes = 10);

// Exact-count variant: per_class items from every class; throws DataError if
// any class has fewer.
LabeledDataset stratified_subsample_count(const LabeledDataset& ds, int per_class, uint64_t seed,
                                          int num_classes = 10);

// Disjoint stratified split; second element holds round(val_fraction * N)
// items (largest-remainder per class).
std::pair<LabeledDataset, LabeledDataset> train_val_split(const LabeledDataset& ds,
                                                          double val_fraction, uint64_t seed,
                                                          int num_classes = 10);

// Per-class pixel means, one image per class, labels 0..num_classes-1 in
// order. Classes with no items throw DataError.
LabeledDataset mean_image_per_class(const LabeledDataset& ds, int num_classes = 10);

// Items whose labels fall in [lo, hi); labels are kept as-is.
LabeledDataset filter_label_range(const LabeledDataset& ds, int lo, int hi);

// Fast binary cache of a LabeledDataset (magic "IPDS").
void save_dataset_cache(const std::string& path, const LabeledDataset& ds);
LabeledDataset load_dataset_cache(const std::string& path);

}  // namespace ipkp

#endif
