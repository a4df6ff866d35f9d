#include "magnum/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "magnum/errors.hpp"
#include "magnum/ops.hpp"
#include "magnum/rng.hpp"
#include "magnum/schema.hpp"

namespace magnum {

double lr_at(std::size_t step, std::size_t total_steps, double lr_peak,
             double warmup_fraction) {
    if (total_steps == 0) throw ContractError("schedule needs at least one step");
    if (step > total_steps)
        throw ContractError("schedule step " + std::to_string(step) + " past total " +
                            std::to_string(total_steps));
    if (step == total_steps) return 0.0;
    const std::size_t warmup =
        static_cast<std::size_t>(warmup_fraction * static_cast<double>(total_steps));
    if (warmup > 0 && step <= warmup)
        return lr_peak * (static_cast<double>(step) / static_cast<double>(warmup));
    const double progress = static_cast<double>(step - warmup) /
                            static_cast<double>(total_steps - warmup);
    return lr_peak * 0.5 * (1.0 + std::cos(progress * 3.14159265358979323846));
}

AdamW::AdamW(double beta1, double beta2, double eps, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

void AdamW::step(ParamRegistry& params, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (Parameter& p : params.all()) {
        if (p.frozen || !p.tensor.has_grad()) continue;
        const std::vector<double>& g = p.tensor.grad();
        for (double gv : g) {
            if (!std::isfinite(gv))
                throw NumericError("non-finite gradient in parameter " + p.name);
        }
        Moments& mom = state_[p.name];
        if (mom.m.empty()) {
            mom.m.assign(g.size(), 0.0);
            mom.v.assign(g.size(), 0.0);
        }
        std::vector<double>& w = p.tensor.values_mut();
        for (std::size_t i = 0; i < g.size(); ++i) {
            mom.m[i] = beta1_ * mom.m[i] + (1.0 - beta1_) * g[i];
            mom.v[i] = beta2_ * mom.v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = mom.m[i] / bc1;
            const double vhat = mom.v[i] / bc2;
            w[i] -= lr * weight_decay_ * w[i];
            w[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

double balanced_accuracy(const std::vector<std::size_t>& y_true,
                         const std::vector<std::size_t>& y_pred) {
    if (y_true.empty()) throw ContractError("balanced accuracy over an empty set");
    if (y_true.size() != y_pred.size())
        throw ContractError("label/prediction length mismatch: " +
                            std::to_string(y_true.size()) + " vs " +
                            std::to_string(y_pred.size()));
    std::map<std::size_t, std::pair<std::size_t, std::size_t>> per_class;  // hits, total
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        auto& [hits, total] = per_class[y_true[i]];
        ++total;
        if (y_pred[i] == y_true[i]) ++hits;
    }
    double sum = 0.0;
    for (const auto& [label, counts] : per_class)
        sum += static_cast<double>(counts.first) / static_cast<double>(counts.second);
    return sum / static_cast<double>(per_class.size());
}

double evaluate(const Model& model, const Dataset& dataset,
                const std::vector<std::size_t>& indices) {
    std::vector<std::size_t> y_true, y_pred;
    y_true.reserve(indices.size());
    y_pred.reserve(indices.size());
    for (std::size_t idx : indices) {
        const Sample& s = dataset.samples.at(idx);
        y_true.push_back(s.label);
        y_pred.push_back(model.predict(s));
    }
    return balanced_accuracy(y_true, y_pred);
}

namespace {

constexpr char kMagic[4] = {'M', 'G', 'C', 'P'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out += s;
}

struct Reader {
    const std::string& data;
    std::size_t at = 0;

    void need(std::size_t count, const std::string& what) {
        if (at + count > data.size()) throw FormatError("truncated " + what, at);
    }
    std::uint8_t u8(const std::string& what) {
        need(1, what);
        return static_cast<std::uint8_t>(data[at++]);
    }
    std::uint16_t u16(const std::string& what) {
        need(2, what);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(data[at + i])) << (8 * i);
        at += 2;
        return v;
    }
    std::uint32_t u32(const std::string& what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data[at + i])) << (8 * i);
        at += 4;
        return v;
    }
    std::uint64_t u64(const std::string& what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data[at + i])) << (8 * i);
        at += 8;
        return v;
    }
    double f64(const std::string& what) { return std::bit_cast<double>(u64(what)); }
    std::string str(const std::string& what) {
        const std::uint32_t len = u32(what + " length");
        need(len, what);
        std::string s = data.substr(at, len);
        at += len;
        return s;
    }
};

void put_record(std::string& out, const TensorRecord& rec) {
    put_str(out, rec.name);
    out.push_back(static_cast<char>(rec.dims.size()));
    std::size_t numel = 1;
    for (std::size_t d : rec.dims) {
        put_u32(out, static_cast<std::uint32_t>(d));
        numel *= d;
    }
    if (numel != rec.values.size())
        throw ContractError("record " + rec.name + " dims disagree with value count");
    for (double v : rec.values) put_f64(out, v);
}

TensorRecord read_record(Reader& r) {
    TensorRecord rec;
    rec.name = r.str("record name");
    const std::uint8_t rank = r.u8("record rank");
    std::size_t numel = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
        const std::uint32_t d = r.u32("record dim");
        if (d != 0 && numel > SIZE_MAX / d) throw FormatError("record dims overflow", r.at - 4);
        numel *= d;
        rec.dims.push_back(d);
    }
    rec.values.reserve(numel);
    for (std::size_t i = 0; i < numel; ++i) rec.values.push_back(r.f64("record values"));
    return rec;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::string out;
    out.append(kMagic, 4);
    put_u16(out, kVersion);
    put_u64(out, ckpt.config_hash);
    put_u64(out, ckpt.seed);
    put_u32(out, ckpt.epoch);
    put_f64(out, ckpt.val_balanced_accuracy);
    put_str(out, ckpt.config_text);
    put_str(out, ckpt.schema_json);
    put_str(out, ckpt.meta_json);
    put_u32(out, static_cast<std::uint32_t>(ckpt.params.size()));
    for (const TensorRecord& rec : ckpt.params) put_record(out, rec);
    put_u32(out, static_cast<std::uint32_t>(ckpt.opt_state.size()));
    for (const TensorRecord& rec : ckpt.opt_state) put_record(out, rec);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ContractError("cannot write checkpoint: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw ContractError("short write for checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ContractError("cannot read checkpoint: " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    const std::string data = buf.str();

    Reader r{data};
    r.need(4, "magic");
    if (data.compare(0, 4, kMagic, 4) != 0) throw FormatError("bad checkpoint magic", 0);
    r.at = 4;
    const std::uint16_t version = r.u16("version");
    if (version != kVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);

    Checkpoint ckpt;
    ckpt.config_hash = r.u64("config hash");
    ckpt.seed = r.u64("seed");
    ckpt.epoch = r.u32("epoch");
    ckpt.val_balanced_accuracy = r.f64("validation metric");
    ckpt.config_text = r.str("config text");
    ckpt.schema_json = r.str("schema json");
    ckpt.meta_json = r.str("meta json");
    const std::uint32_t n_params = r.u32("parameter count");
    for (std::uint32_t i = 0; i < n_params; ++i) ckpt.params.push_back(read_record(r));
    const std::uint32_t n_state = r.u32("state count");
    for (std::uint32_t i = 0; i < n_state; ++i) ckpt.opt_state.push_back(read_record(r));
    if (r.at != data.size()) throw FormatError("trailing bytes after checkpoint", r.at);
    return ckpt;
}

void apply_checkpoint_params(const Checkpoint& ckpt, ParamRegistry& params) {
    std::map<std::string, const TensorRecord*> by_name;
    for (const TensorRecord& rec : ckpt.params) by_name[rec.name] = &rec;
    if (by_name.size() != ckpt.params.size())
        throw ContractError("duplicate record name in checkpoint");
    std::size_t used = 0;
    for (Parameter& p : params.all()) {
        auto it = by_name.find(p.name);
        if (it == by_name.end())
            throw ContractError("checkpoint lacks parameter " + p.name);
        const TensorRecord& rec = *it->second;
        if (rec.dims != p.tensor.shape())
            throw ContractError("checkpoint shape mismatch for " + p.name + ": " +
                                shape_str(rec.dims) + " vs " + shape_str(p.tensor.shape()));
        p.tensor.values_mut() = rec.values;
        ++used;
    }
    if (used != by_name.size())
        throw ContractError("checkpoint has records for unknown parameters");
}

RestoredModel restore_model(const Checkpoint& ckpt) {
    RestoredModel r;
    r.config = parse_config(ckpt.config_text);
    if (r.config.hash() != ckpt.config_hash)
        throw ContractError("checkpoint config text does not match its recorded hash");
    r.schema = schema_from_json(ckpt.schema_json);

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(ckpt.meta_json);
        for (const auto& name : meta.at("class_names"))
            r.class_names.push_back(name.get<std::string>());
        for (const auto& u : meta.at("unstructured")) {
            UnstructuredSpec spec;
            spec.name = u.at("name").get<std::string>();
            spec.count = u.at("count").get<std::size_t>();
            spec.dim = u.at("dim").get<std::size_t>();
            r.unstructured.push_back(spec);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("malformed checkpoint metadata: ") + e.what());
    }

    r.params = std::make_unique<ParamRegistry>();
    Rng rng(derive_seed(r.config.seed, "init"));
    r.model = std::make_unique<Model>(r.config, r.schema, r.unstructured,
                                      r.class_names.size(), *r.params, rng);
    apply_checkpoint_params(ckpt, *r.params);
    return r;
}

namespace {

struct BestSnapshot {
    std::size_t epoch = 0;
    double val = 0.0;
    std::vector<std::vector<double>> values;
    std::unordered_map<std::string, AdamW::Moments> opt;
    std::size_t opt_steps = 0;
};

void capture(BestSnapshot& snap, std::size_t epoch, double val, const ParamRegistry& params,
             const AdamW& optim) {
    snap.epoch = epoch;
    snap.val = val;
    snap.values.clear();
    for (const Parameter& p : params.all()) snap.values.push_back(p.tensor.values());
    snap.opt = optim.state();
    snap.opt_steps = optim.steps_taken();
}

void restore_values(const BestSnapshot& snap, ParamRegistry& params) {
    for (std::size_t i = 0; i < params.all().size(); ++i)
        params.all()[i].tensor.values_mut() = snap.values[i];
}

std::string meta_json_for(const Dataset& dataset) {
    nlohmann::ordered_json meta;
    meta["class_names"] = dataset.class_names;
    meta["unstructured"] = nlohmann::ordered_json::array();
    for (const auto& u : dataset.unstructured) {
        meta["unstructured"].push_back(
            {{"name", u.name}, {"count", u.count}, {"dim", u.dim}});
    }
    return meta.dump();
}

Checkpoint build_checkpoint(const RunConfig& cfg, const TabularSchema& schema,
                            const Dataset& dataset, const ParamRegistry& params,
                            const BestSnapshot& snap) {
    Checkpoint ckpt;
    ckpt.config_hash = cfg.hash();
    ckpt.seed = cfg.seed;
    ckpt.epoch = static_cast<std::uint32_t>(snap.epoch);
    ckpt.val_balanced_accuracy = snap.val;
    ckpt.config_text = cfg.to_text();
    ckpt.schema_json = schema_to_json(schema);
    ckpt.meta_json = meta_json_for(dataset);
    for (std::size_t i = 0; i < params.all().size(); ++i) {
        const Parameter& p = params.all()[i];
        ckpt.params.push_back(TensorRecord{p.name, p.tensor.shape(), snap.values[i]});
    }
    for (const Parameter& p : params.all()) {
        auto it = snap.opt.find(p.name);
        if (it == snap.opt.end()) continue;
        const Shape shape = p.tensor.shape();
        ckpt.opt_state.push_back(TensorRecord{p.name + "#m", shape, it->second.m});
        ckpt.opt_state.push_back(TensorRecord{p.name + "#v", shape, it->second.v});
    }
    ckpt.opt_state.push_back(
        TensorRecord{"optim/#step", {1}, {static_cast<double>(snap.opt_steps)}});
    return ckpt;
}

}  // namespace

TrainOutcome train(Model& model, ParamRegistry& params, const Dataset& dataset,
                   const SplitIndices& splits, const RunConfig& cfg,
                   const std::filesystem::path& out_dir) {
    if (splits.train.empty() || splits.val.empty())
        throw ContractError("training requires non-empty train and validation splits");
    if (cfg.epochs == 0) throw ContractError("training requires at least one epoch");

    std::filesystem::create_directories(out_dir);
    std::ofstream log(out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log) throw ContractError("cannot write training log under " + out_dir.string());

    const std::size_t n = splits.train.size();
    const std::size_t batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = cfg.epochs * batches_per_epoch;

    AdamW optim(cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay);
    TrainOutcome outcome;
    BestSnapshot best;
    bool have_best = false;

    std::vector<std::size_t> order(splits.train);
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs && !outcome.diverged; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, "epoch " + std::to_string(epoch)));
        order.assign(splits.train.begin(), splits.train.end());
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        double lr_last = 0.0;
        for (std::size_t begin = 0; begin < n && !outcome.diverged; begin += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, n - begin);
            Tensor batch_loss = model.loss(dataset.samples.at(order[begin]));
            for (std::size_t i = 1; i < count; ++i)
                batch_loss = add(batch_loss, model.loss(dataset.samples.at(order[begin + i])));
            batch_loss = scale(batch_loss, 1.0 / static_cast<double>(count));

            const double value = batch_loss.item();
            if (!std::isfinite(value)) {
                outcome.diverged = true;
                outcome.divergence_note =
                    "non-finite loss at epoch " + std::to_string(epoch);
                break;
            }
            loss_sum += value * static_cast<double>(count);

            params.zero_grad();
            backward(batch_loss);
            ++step;
            lr_last = lr_at(step, total_steps, cfg.lr, cfg.warmup_fraction);
            try {
                optim.step(params, lr_last);
            } catch (const NumericError& e) {
                outcome.diverged = true;
                outcome.divergence_note = e.what();
                break;
            }
            outcome.steps_taken = step;
        }
        if (outcome.diverged) break;

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(n);
        rec.val_balanced_accuracy = evaluate(model, dataset, splits.val);
        rec.lr_last = lr_last;
        outcome.epochs.push_back(rec);

        nlohmann::ordered_json line;
        line["epoch"] = rec.epoch;
        line["train_loss"] = rec.train_loss;
        line["val_balanced_accuracy"] = rec.val_balanced_accuracy;
        line["lr_last"] = rec.lr_last;
        log << line.dump() << "\n";
        log.flush();

        if (!have_best || rec.val_balanced_accuracy > best.val) {
            capture(best, epoch, rec.val_balanced_accuracy, params, optim);
            have_best = true;
        }
    }

    if (have_best) {
        restore_values(best, params);
        outcome.best_epoch = best.epoch;
        outcome.best_val = best.val;
        const Checkpoint ckpt = build_checkpoint(cfg, model.schema(), dataset, params, best);
        save_checkpoint(ckpt, out_dir / "checkpoint.mgcp");
        outcome.checkpoint_written = true;
        if (!splits.test.empty())
            outcome.test_balanced_accuracy = evaluate(model, dataset, splits.test);
    }

    nlohmann::ordered_json summary;
    summary["best_epoch"] = outcome.best_epoch;
    summary["best_val_balanced_accuracy"] = outcome.best_val;
    summary["test_balanced_accuracy"] = outcome.test_balanced_accuracy;
    summary["diverged"] = outcome.diverged;
    summary["seed"] = cfg.seed;
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                  static_cast<unsigned long long>(cfg.hash()));
    summary["config_hash"] = hash_hex;
    std::ofstream summary_file(out_dir / "summary.json", std::ios::trunc);
    summary_file << summary.dump(2) << "\n";

    return outcome;
}

}  // namespace magnum
