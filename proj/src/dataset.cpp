#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ipkp/rng.hpp"
#include "wire.hpp"

namespace ipkp {

namespace {

constexpr uint32_t kIdxImagesMagic = 0x00000803;  // u8 payload, 3 dims
constexpr uint32_t kIdxLabelsMagic = 0x00000801;  // u8 payload, 1 dim
constexpr char kCacheMagic[4] = {'I', 'P', 'D', 'S'};
constexpr uint32_t kCacheVersion = 1;

void put_u32_be(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

// Per-class index lists, validating the label range as a side effect.
std::vector<std::vector<int>> indices_by_class(const LabeledDataset& ds, int num_classes) {
    std::vector<std::vector<int>> by_class(static_cast<size_t>(num_classes));
    for (int i = 0; i < ds.size(); ++i) {
        int label = ds.labels[static_cast<size_t>(i)];
        if (label < 0 || label >= num_classes) {
            throw DataError(strprintf("label %d at index %d outside [0, %d)", label, i, num_classes));
        }
        by_class[static_cast<size_t>(label)].push_back(i);
    }
    return by_class;
}

// Integer quotas summing to exactly `total`, proportional to the class sizes:
// floor everything, then hand the leftover items to the largest fractional
// remainders (ties to the lower class id).
std::vector<int> largest_remainder_quotas(const std::vector<std::vector<int>>& by_class,
                                          double fraction, int total) {
    size_t nc = by_class.size();
    std::vector<int> quota(nc);
    std::vector<std::pair<double, int>> rem(nc);
    int assigned = 0;
    for (size_t c = 0; c < nc; ++c) {
        double exact = fraction * static_cast<double>(by_class[c].size());
        quota[c] = static_cast<int>(std::floor(exact));
        rem[c] = {exact - std::floor(exact), static_cast<int>(c)};
        assigned += quota[c];
    }
    std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (size_t r = 0; assigned < total; ++r) {
        quota[static_cast<size_t>(rem[r % nc].second)] += 1;
        assigned += 1;
    }
    // Over-assignment can only happen through rounding of `total` itself;
    // trim from the smallest remainders upward.
    for (size_t r = nc; assigned > total; --r) {
        size_t c = static_cast<size_t>(rem[(r - 1) % nc].second);
        if (quota[c] > 0) {
            quota[c] -= 1;
            assigned -= 1;
        }
    }
    for (size_t c = 0; c < nc; ++c) {
        if (quota[c] > static_cast<int>(by_class[c].size())) {
            throw DataError(strprintf("class %zu has %zu items, quota needs %d", c,
                                      by_class[c].size(), quota[c]));
        }
    }
    return quota;
}

LabeledDataset gather(const LabeledDataset& ds, const std::vector<std::vector<int>>& by_class,
                      const std::vector<int>& quota, uint64_t seed) {
    std::vector<int> chosen;
    for (size_t c = 0; c < by_class.size(); ++c) {
        if (quota[c] == 0) continue;
        std::vector<int> pool = by_class[c];
        Rng rng(seed_mix(seed, {0x5u, static_cast<uint64_t>(c)}));
        rng.shuffle(pool);
        chosen.insert(chosen.end(), pool.begin(), pool.begin() + quota[c]);
    }
    Rng rng(seed_mix(seed, {0xF1A7u}));
    rng.shuffle(chosen);
    return take(ds, chosen);
}

}  // namespace

std::vector<int> class_counts(const LabeledDataset& ds, int num_classes) {
    std::vector<int> counts(static_cast<size_t>(num_classes), 0);
    for (int i = 0; i < ds.size(); ++i) {
        int label = ds.labels[static_cast<size_t>(i)];
        if (label < 0 || label >= num_classes) {
            throw DataError(strprintf("label %d at index %d outside [0, %d)", label, i, num_classes));
        }
        counts[static_cast<size_t>(label)] += 1;
    }
    return counts;
}

LabeledDataset take(const LabeledDataset& ds, const std::vector<int>& indices) {
    if (indices.empty()) throw DataError("take: empty index list");
    int64_t item = ds.item_size();
    Tensor images({static_cast<int>(indices.size()), ds.channels(), ds.height(), ds.width()});
    std::vector<int> labels(indices.size());
    for (size_t i = 0; i < indices.size(); ++i) {
        int src = indices[i];
        if (src < 0 || src >= ds.size()) {
            throw DataError(strprintf("take: index %d outside dataset of %d", src, ds.size()));
        }
        std::memcpy(images.ptr() + static_cast<int64_t>(i) * item, ds.item(src),
                    static_cast<size_t>(item) * sizeof(float));
        labels[i] = ds.labels[static_cast<size_t>(src)];
    }
    return {std::move(images), std::move(labels)};
}

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b) {
    if (a.size() == 0) return b;
    if (b.size() == 0) return a;
    if (a.channels() != b.channels() || a.height() != b.height() || a.width() != b.width()) {
        throw ShapeError("concat: item shapes differ: " + a.images.shape_str() + " vs " +
                         b.images.shape_str());
    }
    Tensor images({a.size() + b.size(), a.channels(), a.height(), a.width()});
    std::copy(a.images.data.begin(), a.images.data.end(), images.data.begin());
    std::copy(b.images.data.begin(), b.images.data.end(),
              images.data.begin() + a.images.size());
    std::vector<int> labels = a.labels;
    labels.insert(labels.end(), b.labels.begin(), b.labels.end());
    return {std::move(images), std::move(labels)};
}

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    wire::Reader ir(images_path);
    uint32_t magic = ir.u32_be("magic");
    if (magic != kIdxImagesMagic) {
        throw DataError(strprintf("%s: magic 0x%08x is not an image file (want 0x%08x)",
                                  images_path.c_str(), magic, kIdxImagesMagic));
    }
    uint32_t n = ir.u32_be("image count");
    uint32_t h = ir.u32_be("rows");
    uint32_t w = ir.u32_be("cols");
    if (n == 0 || h == 0 || w == 0 || n > 10'000'000u || h > 4096u || w > 4096u) {
        throw DataError(strprintf("%s: implausible dimensions %u x %u x %u", images_path.c_str(),
                                  n, h, w));
    }
    std::vector<unsigned char> raw(static_cast<size_t>(n) * h * w);
    ir.need(raw.data(), raw.size(), "pixels");

    wire::Reader lr(labels_path);
    uint32_t lmagic = lr.u32_be("magic");
    if (lmagic != kIdxLabelsMagic) {
        throw DataError(strprintf("%s: magic 0x%08x is not a label file (want 0x%08x)",
                                  labels_path.c_str(), lmagic, kIdxLabelsMagic));
    }
    uint32_t ln = lr.u32_be("label count");
    if (ln != n) {
        throw DataError(strprintf("%s has %u labels but %s has %u images", labels_path.c_str(), ln,
                                  images_path.c_str(), n));
    }
    std::vector<unsigned char> labs(ln);
    lr.need(labs.data(), labs.size(), "labels");

    Tensor images({static_cast<int>(n), 1, static_cast<int>(h), static_cast<int>(w)});
    for (size_t i = 0; i < raw.size(); ++i) {
        images.data[i] = static_cast<float>(raw[i]) / 255.0f;
    }
    std::vector<int> labels(labs.begin(), labs.end());
    return {std::move(images), std::move(labels)};
}

void write_idx(const std::string& images_path, const std::string& labels_path,
               const LabeledDataset& ds) {
    if (ds.channels() != 1) throw DataError("write_idx: only single-channel images");
    std::ofstream io(images_path, std::ios::binary);
    if (!io) throw DataError("cannot open " + images_path + " for writing");
    put_u32_be(io, kIdxImagesMagic);
    put_u32_be(io, static_cast<uint32_t>(ds.size()));
    put_u32_be(io, static_cast<uint32_t>(ds.height()));
    put_u32_be(io, static_cast<uint32_t>(ds.width()));
    std::vector<unsigned char> raw(ds.images.data.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        float v = std::clamp(ds.images.data[i], 0.0f, 1.0f);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    io.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!io) throw DataError("write failed for " + images_path);

    std::ofstream lo(labels_path, std::ios::binary);
    if (!lo) throw DataError("cannot open " + labels_path + " for writing");
    put_u32_be(lo, kIdxLabelsMagic);
    put_u32_be(lo, static_cast<uint32_t>(ds.size()));
    std::vector<unsigned char> labs(ds.labels.size());
    for (size_t i = 0; i < labs.size(); ++i) {
        labs[i] = static_cast<unsigned char>(ds.labels[i]);
    }
    lo.write(reinterpret_cast<const char*>(labs.data()), static_cast<std::streamsize>(labs.size()));
    if (!lo) throw DataError("write failed for " + labels_path);
}

std::vector<float> resize_bilinear(const float* src, int h, int w, int out_h, int out_w) {
    std::vector<float> out(static_cast<size_t>(out_h) * out_w);
    double sy = static_cast<double>(h) / out_h;
    double sx = static_cast<double>(w) / out_w;
    for (int r = 0; r < out_h; ++r) {
        double fy = (r + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y1 = std::min(y0 + 1, h - 1);
        y0 = std::clamp(y0, 0, h - 1);
        for (int c = 0; c < out_w; ++c) {
            double fx = (c + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x1 = std::min(x0 + 1, w - 1);
            x0 = std::clamp(x0, 0, w - 1);
            double top = (1.0 - wx) * src[static_cast<size_t>(y0) * w + x0] +
                         wx * src[static_cast<size_t>(y0) * w + x1];
            double bot = (1.0 - wx) * src[static_cast<size_t>(y1) * w + x0] +
                         wx * src[static_cast<size_t>(y1) * w + x1];
            out[static_cast<size_t>(r) * out_w + c] =
                static_cast<float>((1.0 - wy) * top + wy * bot);
        }
    }
    return out;
}

LabeledDataset load_usps(const std::string& path, int target_h, int target_w) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<float> all_pixels;
    std::vector<int> labels;
    std::string line;
    int line_no = 0;
    std::vector<float> native(256);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        double label_val = 0;
        if (!(ls >> label_val)) {
            throw DataError(strprintf("%s:%d: cannot parse label", path.c_str(), line_no));
        }
        int label = static_cast<int>(std::lround(label_val));
        if (label < 0 || label > 9 || std::abs(label_val - label) > 1e-9) {
            throw DataError(strprintf("%s:%d: label %g is not a digit class", path.c_str(), line_no,
                                      label_val));
        }
        for (int i = 0; i < 256; ++i) {
            double v = 0;
            if (!(ls >> v)) {
                throw DataError(strprintf("%s:%d: expected 256 values, got %d", path.c_str(),
                                          line_no, i));
            }
            if (v < -1.0 - 1e-6 || v > 1.0 + 1e-6) {
                throw DataError(strprintf("%s:%d: value %g at position %d outside [-1, 1]",
                                          path.c_str(), line_no, v, i + 1));
            }
            native[static_cast<size_t>(i)] = static_cast<float>((v + 1.0) / 2.0);
        }
        double extra = 0;
        if (ls >> extra) {
            throw DataError(strprintf("%s:%d: more than 256 values on the line", path.c_str(),
                                      line_no));
        }
        std::vector<float> img = (target_h == 16 && target_w == 16)
                                     ? native
                                     : resize_bilinear(native.data(), 16, 16, target_h, target_w);
        for (float& v : img) v = std::clamp(v, 0.0f, 1.0f);
        all_pixels.insert(all_pixels.end(), img.begin(), img.end());
        labels.push_back(label);
    }
    if (labels.empty()) throw DataError(path + ": no image rows found");
    Tensor images({static_cast<int>(labels.size()), 1, target_h, target_w});
    images.data = std::move(all_pixels);
    return {std::move(images), std::move(labels)};
}

void write_usps(const std::string& path, const LabeledDataset& ds) {
    if (ds.channels() != 1 || ds.height() != 16 || ds.width() != 16) {
        throw DataError("write_usps: items must be [1, 16, 16], got " + ds.images.shape_str());
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    char buf[16];
    for (int i = 0; i < ds.size(); ++i) {
        out << ds.labels[static_cast<size_t>(i)];
        const float* img = ds.item(i);
        for (int j = 0; j < 256; ++j) {
            double v = std::clamp(static_cast<double>(img[j]) * 2.0 - 1.0, -1.0, 1.0);
            std::snprintf(buf, sizeof buf, " %.4f", v);
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed for " + path);
}

LabeledDataset stratified_subsample(const LabeledDataset& ds, double fraction, uint64_t seed,
                                    int num_classes) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw ConfigError(strprintf("subset fraction must be in (0, 1], got %g", fraction));
    }
    auto by_class = indices_by_class(ds, num_classes);
    int total = static_cast<int>(std::lround(fraction * ds.size()));
    if (total < 1) {
        throw ConfigError(strprintf("fraction %g of %d items rounds to zero", fraction, ds.size()));
    }
    auto quota = largest_remainder_quotas(by_class, fraction, total);
    return gather(ds, by_class, quota, seed);
}

LabeledDataset stratified_subsample_count(const LabeledDataset& ds, int per_class, uint64_t seed,
                                          int num_classes) {
    if (per_class < 1) throw ConfigError(strprintf("per-class count must be >= 1, got %d", per_class));
    auto by_class = indices_by_class(ds, num_classes);
    std::vector<int> quota(static_cast<size_t>(num_classes), per_class);
    for (size_t c = 0; c < by_class.size(); ++c) {
        if (static_cast<int>(by_class[c].size()) < per_class) {
            throw DataError(strprintf("class %zu has only %zu items, need %d", c,
                                      by_class[c].size(), per_class));
        }
    }
    return gather(ds, by_class, quota, seed);
}

std::pair<LabeledDataset, LabeledDataset> train_val_split(const LabeledDataset& ds,
                                                          double val_fraction, uint64_t seed,
                                                          int num_classes) {
    if (!(val_fraction > 0.0) || val_fraction >= 1.0) {
        throw ConfigError(strprintf("validation fraction must be in (0, 1), got %g", val_fraction));
    }
    auto by_class = indices_by_class(ds, num_classes);
    int val_total = static_cast<int>(std::lround(val_fraction * ds.size()));
    auto val_quota = largest_remainder_quotas(by_class, val_fraction, val_total);
    std::vector<int> val_idx, train_idx;
    for (size_t c = 0; c < by_class.size(); ++c) {
        std::vector<int> pool = by_class[c];
        Rng rng(seed_mix(seed, {0x51u, static_cast<uint64_t>(c)}));
        rng.shuffle(pool);
        val_idx.insert(val_idx.end(), pool.begin(), pool.begin() + val_quota[c]);
        train_idx.insert(train_idx.end(), pool.begin() + val_quota[c], pool.end());
    }
    Rng tr(seed_mix(seed, {0x52u}));
    tr.shuffle(train_idx);
    Rng vr(seed_mix(seed, {0x53u}));
    vr.shuffle(val_idx);
    return {take(ds, train_idx), take(ds, val_idx)};
}

LabeledDataset mean_image_per_class(const LabeledDataset& ds, int num_classes) {
    auto by_class = indices_by_class(ds, num_classes);
    int64_t item = ds.item_size();
    Tensor images({num_classes, ds.channels(), ds.height(), ds.width()});
    std::vector<int> labels(static_cast<size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        const auto& idx = by_class[static_cast<size_t>(c)];
        if (idx.empty()) throw DataError(strprintf("class %d has no items to average", c));
        std::vector<double> acc(static_cast<size_t>(item), 0.0);
        for (int i : idx) {
            const float* img = ds.item(i);
            for (int64_t j = 0; j < item; ++j) acc[static_cast<size_t>(j)] += img[j];
        }
        float* dst = images.ptr() + static_cast<int64_t>(c) * item;
        for (int64_t j = 0; j < item; ++j) {
            dst[j] = static_cast<float>(acc[static_cast<size_t>(j)] / static_cast<double>(idx.size()));
        }
        labels[static_cast<size_t>(c)] = c;
    }
    return {std::move(images), std::move(labels)};
}

LabeledDataset filter_label_range(const LabeledDataset& ds, int lo, int hi) {
    std::vector<int> keep;
    for (int i = 0; i < ds.size(); ++i) {
        int label = ds.labels[static_cast<size_t>(i)];
        if (label >= lo && label < hi) keep.push_back(i);
    }
    if (keep.empty()) {
        throw DataError(strprintf("no items with labels in [%d, %d)", lo, hi));
    }
    return take(ds, keep);
}

void save_dataset_cache(const std::string& path, const LabeledDataset& ds) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os.write(kCacheMagic, 4);
    wire::put_u32(os, kCacheVersion);
    wire::put_u32(os, static_cast<uint32_t>(ds.size()));
    wire::put_u32(os, static_cast<uint32_t>(ds.channels()));
    wire::put_u32(os, static_cast<uint32_t>(ds.height()));
    wire::put_u32(os, static_cast<uint32_t>(ds.width()));
    for (int label : ds.labels) wire::put_u32(os, static_cast<uint32_t>(label));
    wire::put_f32_blob(os, ds.images.data);
    if (!os) throw DataError("write failed for " + path);
}

LabeledDataset load_dataset_cache(const std::string& path) {
    wire::Reader r(path);
    char magic[4];
    r.need(magic, 4, "magic");
    if (std::memcmp(magic, kCacheMagic, 4) != 0) {
        throw DataError(path + ": not a dataset cache (bad magic)");
    }
    uint32_t version = r.u32("version");
    if (version != kCacheVersion) {
        throw DataError(strprintf("%s: unsupported cache version %u", path.c_str(), version));
    }
    uint32_t n = r.u32("item count");
    uint32_t c = r.u32("channels");
    uint32_t h = r.u32("height");
    uint32_t w = r.u32("width");
    if (n == 0 || c == 0 || h == 0 || w == 0 || n > 10'000'000u || h > 4096u || w > 4096u) {
        throw DataError(strprintf("%s: implausible dimensions", path.c_str()));
    }
    std::vector<int> labels(n);
    for (uint32_t i = 0; i < n; ++i) labels[i] = static_cast<int>(r.u32("labels"));
    Tensor images({static_cast<int>(n), static_cast<int>(c), static_cast<int>(h),
                   static_cast<int>(w)});
    r.f32_blob(images.data, "pixels");
    return {std::move(images), std::move(labels)};
}

}  // namespace ipkp
