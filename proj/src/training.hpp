#ifndef IPKP_TRAINING_HPP
#define IPKP_TRAINING_HPP

#include <utility>
#include <vector>

#include "dataset.hpp"
#include "ipkp/model.hpp"
#include "ipkp/optim.hpp"

namespace ipkp {

struct TrainConfig {
    int epochs = 10;
    int batch_size = 32;
    OptimizerConfig optimizer;  // SGD with momentum 0.9, lr 0.01
    uint64_t seed = 0;          // drives the per-epoch shuffles
    bool shuffle = true;
    int eval_every = 0;  // record validation accuracy every this many epochs; 0 = never

    void validate() const;
};

// Loss per optimizer step, and (epoch, accuracy) validation points.
struct TrainingCurve {
    std::vector<float> iteration_loss;
    std::vector<std::pair<int, float>> val_acc;
};

struct PretrainConfig {
    double loss_threshold = 1e-2;  // epoch-mean loss at which the set counts as memorized
    int max_epochs = 500;
    TrainConfig train;  // epochs field is ignored; batch size, optimizer and seed apply
};

struct PretrainResult {
    TrainingCurve curve;
    bool memorized = false;
    double final_loss = 0.0;  // epoch-mean loss of the last epoch run
    int epochs_run = 0;
};

// Fraction of items whose argmax logit matches the label (ties resolve to the
// lower class index).
double evaluate_accuracy(const Model& m, const LabeledDataset& ds, int batch_size = 256);

// Runs cfg.epochs epochs of minibatch SGD over ds (ceil(N/B) steps per epoch,
// final short batch included). Throws DivergedError the first time a step
// loss is not finite. val may be null.
TrainingCurve train_epochs(Model& m, const LabeledDataset& ds, const LabeledDataset* val,
                           const TrainConfig& cfg);

// Trains on the prototype set until the epoch-mean loss drops below
// cfg.loss_threshold (memorized) or cfg.max_epochs is exhausted.
PretrainResult pretrain(Model& m, const LabeledDataset& protos, const PretrainConfig& cfg);

// Epoch budget that holds items x steps constant as the dataset shrinks:
// round(base / fraction).
int scaled_epochs(int base, double fraction);

// Fresh model with source's architecture: parameters reinitialized from
// `init`, then the first k parameterized layers copied from source.
// k must be in [0, L] where L counts source's parameterized layers.
Model truncate_transfer(const Model& source, int k, const InitScheme& init);

// real plus proto_repeats copies of protos appended; the training loop's
// per-epoch shuffle interleaves them.
LabeledDataset mix_datasets(const LabeledDataset& real, const LabeledDataset& protos,
                            int proto_repeats);

}  // namespace ipkp

#endif
