#include "training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "ipkp/ops.hpp"
#include "ipkp/rng.hpp"

namespace ipkp {

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError(strprintf("train: epochs must be >= 0, got %d", epochs));
    if (batch_size < 1) throw ConfigError(strprintf("train: batch size must be >= 1, got %d", batch_size));
    if (eval_every < 0) throw ConfigError(strprintf("train: eval cadence must be >= 0, got %d", eval_every));
    optimizer.validate();
}

namespace {

// Copies rows [first, first+count) of the index order into a batch tensor.
void gather_batch(const LabeledDataset& ds, const std::vector<int>& order, size_t first,
                  int count, Tensor& batch, std::vector<int>& labels) {
    int64_t item = ds.item_size();
    if (batch.ndim() != 4 || batch.dim(0) != count) {
        batch = Tensor({count, ds.channels(), ds.height(), ds.width()});
    }
    labels.resize(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        int src = order[first + static_cast<size_t>(i)];
        std::memcpy(batch.ptr() + static_cast<int64_t>(i) * item, ds.item(src),
                    static_cast<size_t>(item) * sizeof(float));
        labels[static_cast<size_t>(i)] = ds.labels[static_cast<size_t>(src)];
    }
}

struct EpochStats {
    double mean_loss = 0.0;
};

// One pass over ds in the given order; appends step losses to curve and
// returns the epoch-mean loss.
EpochStats run_epoch(Model& m, const LabeledDataset& ds, const std::vector<int>& order,
                     const TrainConfig& cfg, long& global_step, TrainingCurve& curve,
                     Activations& acts, Workspace& ws, Gradients& grads, OptState& opt,
                     Tensor& batch, std::vector<int>& batch_labels) {
    size_t n = static_cast<size_t>(ds.size());
    double loss_sum = 0.0;
    long steps = 0;
    for (size_t first = 0; first < n; first += static_cast<size_t>(cfg.batch_size)) {
        int count = static_cast<int>(std::min<size_t>(static_cast<size_t>(cfg.batch_size), n - first));
        gather_batch(ds, order, first, count, batch, batch_labels);
        forward(m, batch, acts, &ws);
        auto [loss, dlogits] = loss_softmax_ce(acts.acts.back(), batch_labels);
        global_step += 1;
        if (!std::isfinite(loss)) {
            throw DivergedError(strprintf("training diverged: loss %g at step %ld", loss, global_step),
                                global_step);
        }
        curve.iteration_loss.push_back(static_cast<float>(loss));
        backward(m, acts, dlogits, grads, &ws);
        optimizer_step(m, grads, opt, cfg.optimizer);
        loss_sum += loss;
        steps += 1;
    }
    return {steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0};
}

}  // namespace

double evaluate_accuracy(const Model& m, const LabeledDataset& ds, int batch_size) {
    if (ds.size() == 0) throw DataError("evaluate_accuracy: empty dataset");
    if (batch_size < 1) throw ConfigError("evaluate_accuracy: batch size must be >= 1");
    Activations acts;
    Workspace ws;
    Tensor batch;
    std::vector<int> labels;
    std::vector<int> order(static_cast<size_t>(ds.size()));
    std::iota(order.begin(), order.end(), 0);
    long correct = 0;
    for (size_t first = 0; first < order.size(); first += static_cast<size_t>(batch_size)) {
        int count = static_cast<int>(std::min<size_t>(static_cast<size_t>(batch_size),
                                                      order.size() - first));
        gather_batch(ds, order, first, count, batch, labels);
        forward(m, batch, acts, &ws);
        const Tensor& logits = acts.acts.back();
        int C = logits.dim(1);
        for (int i = 0; i < count; ++i) {
            const float* row = logits.ptr() + static_cast<size_t>(i) * C;
            int arg = 0;
            for (int j = 1; j < C; ++j) {
                if (row[j] > row[arg]) arg = j;
            }
            if (arg == labels[static_cast<size_t>(i)]) correct += 1;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

TrainingCurve train_epochs(Model& m, const LabeledDataset& ds, const LabeledDataset* val,
                           const TrainConfig& cfg) {
    cfg.validate();
    if (ds.size() == 0) throw DataError("train_epochs: empty dataset");
    TrainingCurve curve;
    Activations acts;
    Workspace ws;
    Gradients grads;
    OptState opt;
    Tensor batch;
    std::vector<int> batch_labels;
    std::vector<int> order(static_cast<size_t>(ds.size()));
    std::iota(order.begin(), order.end(), 0);
    long global_step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.shuffle) {
            Rng rng(seed_mix(cfg.seed, {static_cast<uint64_t>(epoch)}));
            rng.shuffle(order);
        }
        run_epoch(m, ds, order, cfg, global_step, curve, acts, ws, grads, opt, batch, batch_labels);
        if (val && cfg.eval_every > 0 && epoch % cfg.eval_every == 0) {
            curve.val_acc.emplace_back(epoch, static_cast<float>(evaluate_accuracy(m, *val)));
        }
    }
    return curve;
}

PretrainResult pretrain(Model& m, const LabeledDataset& protos, const PretrainConfig& cfg) {
    cfg.train.validate();
    if (protos.size() == 0) throw DataError("pretrain: empty prototype set");
    if (!(cfg.loss_threshold > 0)) {
        throw ConfigError(strprintf("pretrain: loss threshold must be positive, got %g",
                                    cfg.loss_threshold));
    }
    if (cfg.max_epochs < 1) {
        throw ConfigError(strprintf("pretrain: max epochs must be >= 1, got %d", cfg.max_epochs));
    }
    PretrainResult result;
    Activations acts;
    Workspace ws;
    Gradients grads;
    OptState opt;
    Tensor batch;
    std::vector<int> batch_labels;
    std::vector<int> order(static_cast<size_t>(protos.size()));
    std::iota(order.begin(), order.end(), 0);
    long global_step = 0;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        if (cfg.train.shuffle) {
            Rng rng(seed_mix(cfg.train.seed, {static_cast<uint64_t>(epoch)}));
            rng.shuffle(order);
        }
        EpochStats stats = run_epoch(m, protos, order, cfg.train, global_step, result.curve, acts,
                                     ws, grads, opt, batch, batch_labels);
        result.final_loss = stats.mean_loss;
        result.epochs_run = epoch;
        if (stats.mean_loss < cfg.loss_threshold) {
            result.memorized = true;
            break;
        }
    }
    return result;
}

int scaled_epochs(int base, double fraction) {
    if (base < 1) throw ConfigError(strprintf("epoch budget must be >= 1, got %d", base));
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw ConfigError(strprintf("fraction must be in (0, 1], got %g", fraction));
    }
    double scaled = std::round(static_cast<double>(base) / fraction);
    if (scaled > 1e7) throw ConfigError(strprintf("scaled epoch count %g is out of range", scaled));
    return static_cast<int>(scaled);
}

Model truncate_transfer(const Model& source, int k, const InitScheme& init) {
    auto param_idx = source.param_layer_indices();
    int L = static_cast<int>(param_idx.size());
    if (k < 0 || k > L) {
        throw ConfigError(strprintf("transfer depth %d outside [0, %d]", k, L));
    }
    Model fresh = source;
    init_params(fresh, init);
    for (int i = 0; i < k; ++i) {
        size_t li = static_cast<size_t>(param_idx[static_cast<size_t>(i)]);
        fresh.layers[li].weight = source.layers[li].weight;
        fresh.layers[li].bias = source.layers[li].bias;
    }
    return fresh;
}

LabeledDataset mix_datasets(const LabeledDataset& real, const LabeledDataset& protos,
                            int proto_repeats) {
    if (proto_repeats < 0) {
        throw ConfigError(strprintf("prototype repeats must be >= 0, got %d", proto_repeats));
    }
    LabeledDataset out = real;
    for (int r = 0; r < proto_repeats; ++r) out = concat(out, protos);
    return out;
}

}  // namespace ipkp
