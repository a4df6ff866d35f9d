#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "magnum/config.hpp"
#include "magnum/dataset.hpp"
#include "magnum/model.hpp"
#include "magnum/param.hpp"
#include "magnum/tensor.hpp"

namespace magnum {

// Learning-rate schedule: linear ramp from 0 to lr_peak over the first
// floor(warmup_fraction * total_steps) steps, then half-cosine decay to 0
// at total_steps. Steps are 1-based; the ramp peaks exactly at warmup end.
double lr_at(std::size_t step, std::size_t total_steps, double lr_peak,
             double warmup_fraction);

// Adam with decoupled weight decay. Moment state is keyed by parameter name
// and allocated on first use; frozen parameters are never touched.
class AdamW {
  public:
    AdamW(double beta1, double beta2, double eps, double weight_decay);

    // One update over every trainable parameter with a gradient buffer.
    // Throws NumericError naming the parameter if a gradient is non-finite.
    void step(ParamRegistry& params, double lr);

    std::size_t steps_taken() const { return t_; }

    struct Moments {
        std::vector<double> m, v;
    };
    const std::unordered_map<std::string, Moments>& state() const { return state_; }
    std::unordered_map<std::string, Moments>& state() { return state_; }
    void set_steps(std::size_t t) { t_ = t; }

  private:
    double beta1_, beta2_, eps_, weight_decay_;
    std::size_t t_ = 0;
    std::unordered_map<std::string, Moments> state_;
};

// Mean per-class recall; classes absent from y_true are excluded.
double balanced_accuracy(const std::vector<std::size_t>& y_true,
                         const std::vector<std::size_t>& y_pred);

double evaluate(const Model& model, const Dataset& dataset,
                const std::vector<std::size_t>& indices);

// Serialized training state: header metadata, the effective config text,
// the fitted tabular schema, dataset facts needed to rebuild the model, and
// every parameter plus optimizer moment as named tensor records.
struct TensorRecord {
    std::string name;
    Shape dims;
    std::vector<double> values;
};

struct Checkpoint {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::uint32_t epoch = 0;  // 1-based best epoch
    double val_balanced_accuracy = 0.0;
    std::string config_text;
    std::string schema_json;
    std::string meta_json;  // {"class_names": [...], "unstructured": [...]}
    std::vector<TensorRecord> params;
    std::vector<TensorRecord> opt_state;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint parameter values into a registry built from the same
// config; names and shapes must match exactly.
void apply_checkpoint_params(const Checkpoint& ckpt, ParamRegistry& params);

// Rebuilds the model a checkpoint was trained with. The registry is filled
// with freshly initialized parameters and then overwritten from the records.
struct RestoredModel {
    RunConfig config;
    TabularSchema schema;
    std::vector<UnstructuredSpec> unstructured;
    std::vector<std::string> class_names;
    std::unique_ptr<ParamRegistry> params;
    std::unique_ptr<Model> model;
};
RestoredModel restore_model(const Checkpoint& ckpt);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_balanced_accuracy = 0.0;
    double lr_last = 0.0;
};

struct TrainOutcome {
    bool diverged = false;
    std::string divergence_note;
    std::size_t steps_taken = 0;
    std::size_t best_epoch = 0;  // 0 = no epoch completed
    double best_val = 0.0;
    double test_balanced_accuracy = 0.0;
    bool checkpoint_written = false;
    std::vector<EpochRecord> epochs;
};

// Full run: seeded per-epoch shuffles, mini-batches of cfg.batch_size with a
// mean loss per batch, one AdamW step per batch, per-epoch validation, and
// best-validation checkpointing (ties keep the earlier epoch). Writes
// train_log.jsonl, checkpoint.mgcp, and summary.json under out_dir. On
// divergence the loop stops and the best checkpoint so far stays on disk.
// After training the registry holds the best epoch's parameters, and the
// test split is evaluated with them.
TrainOutcome train(Model& model, ParamRegistry& params, const Dataset& dataset,
                   const SplitIndices& splits, const RunConfig& cfg,
                   const std::filesystem::path& out_dir);

}  // namespace magnum
