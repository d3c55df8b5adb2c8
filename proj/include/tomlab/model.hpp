#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tomlab/tensor.hpp"

namespace tomlab::lm {

struct ModelConfig {
    int vocab_size = 0;
    int d_model = 128;
    int n_layers = 8;
    int n_heads = 4;
    int max_seq_len = 256;
    std::string pos_scheme = "learned-absolute";
    std::uint64_t seed = 1;
};

template <typename T>
struct ParamSet {
    std::vector<std::pair<std::string, TensorPtr<T>>> items;
    std::unordered_map<std::string, std::size_t> index;

    void add(const std::string& name, TensorPtr<T> t) {
        index[name] = items.size();
        items.emplace_back(name, std::move(t));
    }
    bool has(const std::string& name) const { return index.count(name) != 0; }
    const TensorPtr<T>& at(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) throw IndexError("unknown parameter: " + name);
        return items[it->second].second;
    }
};

struct Checkpoint {
    ModelConfig config;
    ParamSet<float> params;
    std::int64_t step = 0;
    std::string corpus_fingerprint;
};

// Low-rank delta on one weight matrix: delta = a * b.
template <typename T>
struct Adapter {
    TensorPtr<T> a;  // [in, r]
    TensorPtr<T> b;  // [r, out]
};

template <typename T>
struct AdapterSet {
    std::map<std::string, Adapter<T>> items;  // ordered for deterministic iteration
};

// Per-token residual-stream vectors captured after one block.
struct ActivationRecord {
    int layer_index = 0;
    std::int64_t n = 0;
    std::int64_t d = 0;
    std::vector<float> values;  // row-major n x d
    std::string source_id;
};

enum class DepthPreset { Shallow, Middle, Deep };
DepthPreset parse_depth_preset(const std::string& s);
std::string depth_preset_name(DepthPreset p);

// Maps a depth preset to a block index. Pinned values: n=32 -> 5/15/25
// (matching the 3B/8B layer choices) and n=8 -> 1/4/6 (the desk-scale
// default); deep is clamped to n-2.
int depth_to_layer(DepthPreset preset, int n_layers);

constexpr float kLayerNormEps = 1e-5f;

template <typename T>
struct ForwardOptions {
    int capture_layer = -1;                          // -1: no capture
    int stop_after_layer = -1;                       // -1: run through the head
    const std::vector<int>* position_ids = nullptr;  // default 0..n-1
    const AdapterSet<T>* adapters = nullptr;
    // Substitute rows into the post-block residual stream at patch_layer.
    TensorPtr<T> patch_rows;
    int patch_layer = -1;
    std::int64_t patch_start = 0;
};

template <typename T>
struct ForwardOutput {
    TensorPtr<T> logits;   // [n, V]; null when stopped early
    TensorPtr<T> capture;  // [n, d] residual stream at capture_layer; null if none
};

template <typename T>
TensorPtr<T> effective_weight(Tape<T>& tape, const ParamSet<T>& params,
                              const AdapterSet<T>* adapters, const std::string& name) {
    const auto& w = params.at(name);
    if (adapters) {
        auto it = adapters->items.find(name);
        if (it != adapters->items.end())
            return tape.add(w, tape.matmul(it->second.a, it->second.b));
    }
    return w;
}

// Decoder-only transformer forward pass. The residual stream "at layer l" is
// the post-block output of block l (after the MLP residual add, before the
// next block's norm).
template <typename T>
ForwardOutput<T> transformer_forward(Tape<T>& tape, const ModelConfig& cfg,
                                     const ParamSet<T>& params, std::span<const int> tokens,
                                     const ForwardOptions<T>& opt = {}) {
    const auto n = static_cast<std::int64_t>(tokens.size());
    if (n == 0) throw LengthError("transformer_forward: empty input");
    if (n > cfg.max_seq_len)
        throw LengthError("transformer_forward: input length " + std::to_string(n) +
                          " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
    if (opt.capture_layer >= cfg.n_layers)
        throw RangeError("capture_layer " + std::to_string(opt.capture_layer) +
                         " out of range for " + std::to_string(cfg.n_layers) + " layers");
    const int d = cfg.d_model;
    const int n_heads = cfg.n_heads;
    const int dh = d / n_heads;
    const T eps = static_cast<T>(kLayerNormEps);
    const AdapterSet<T>* ad = opt.adapters;

    std::vector<int> default_pos(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) default_pos[static_cast<std::size_t>(i)] = static_cast<int>(i);
    const std::vector<int>& pos = opt.position_ids ? *opt.position_ids : default_pos;
    if (static_cast<std::int64_t>(pos.size()) != n)
        throw LengthError("transformer_forward: position id count mismatch");

    std::vector<int> ids(tokens.begin(), tokens.end());
    auto x = tape.add(tape.embedding(params.at("wte"), ids),
                      tape.embedding(params.at("wpe"), pos));

    ForwardOutput<T> out;
    const T inv_sqrt_dh = T(1) / std::sqrt(static_cast<T>(dh));
    for (int l = 0; l < cfg.n_layers; ++l) {
        const std::string p = "blocks." + std::to_string(l) + ".";
        auto h = tape.layer_norm(x, params.at(p + "ln1.g"), params.at(p + "ln1.b"), eps);
        auto q = tape.add_rowvec(tape.matmul(h, effective_weight(tape, params, ad, p + "attn.wq")),
                                 params.at(p + "attn.bq"));
        auto k = tape.add_rowvec(tape.matmul(h, effective_weight(tape, params, ad, p + "attn.wk")),
                                 params.at(p + "attn.bk"));
        auto v = tape.add_rowvec(tape.matmul(h, effective_weight(tape, params, ad, p + "attn.wv")),
                                 params.at(p + "attn.bv"));
        std::vector<TensorPtr<T>> head_outs;
        head_outs.reserve(static_cast<std::size_t>(n_heads));
        for (int hd = 0; hd < n_heads; ++hd) {
            auto qh = tape.slice_cols(q, hd * dh, dh);
            auto kh = tape.slice_cols(k, hd * dh, dh);
            auto vh = tape.slice_cols(v, hd * dh, dh);
            auto scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt_dh);
            auto attn = tape.causal_softmax(scores);
            head_outs.push_back(tape.matmul(attn, vh));
        }
        auto merged = tape.concat_cols(head_outs);
        auto attn_out =
            tape.add_rowvec(tape.matmul(merged, effective_weight(tape, params, ad, p + "attn.wo")),
                            params.at(p + "attn.bo"));
        x = tape.add(x, attn_out);

        auto h2 = tape.layer_norm(x, params.at(p + "ln2.g"), params.at(p + "ln2.b"), eps);
        auto up = tape.add_rowvec(tape.matmul(h2, effective_weight(tape, params, ad, p + "mlp.w1")),
                                  params.at(p + "mlp.b1"));
        auto act = tape.relu(up);
        auto down =
            tape.add_rowvec(tape.matmul(act, effective_weight(tape, params, ad, p + "mlp.w2")),
                            params.at(p + "mlp.b2"));
        x = tape.add(x, down);

        if (l == opt.patch_layer && opt.patch_rows)
            x = tape.row_substitute(x, opt.patch_rows, opt.patch_start);
        if (l == opt.capture_layer) out.capture = x;
        if (l == opt.stop_after_layer) return out;
    }
    auto xf = tape.layer_norm(x, params.at("lnf.g"), params.at("lnf.b"), eps);
    out.logits = tape.matmul(xf, params.at("head"));
    return out;
}

ParamSet<double> cast_params(const ParamSet<float>& p);
AdapterSet<double> cast_adapters(const AdapterSet<float>& a);

Checkpoint init_checkpoint(const ModelConfig& cfg);

// Forward pass with optional residual-stream capture at one layer.
struct CaptureResult {
    TensorF logits;
    std::optional<ActivationRecord> record;
};
CaptureResult forward_with_capture(const Checkpoint& ckpt, std::span<const int> tokens,
                                   int capture_layer = -1, const std::string& source_id = "");

// Internal helper for the pipeline: one forward pass, several capture depths.
std::vector<ActivationRecord> forward_multi_capture(const Checkpoint& ckpt,
                                                    std::span<const int> tokens,
                                                    const std::vector<int>& layers,
                                                    const std::string& source_id);

struct TrainHyper {
    float lr = 3e-4f;
    int steps = 500;
    int batch = 8;
    std::uint64_t seed = 1;
    int threads = 2;
    std::string corpus_fingerprint;
    bool verbose = false;
};

Checkpoint clone_checkpoint(const Checkpoint& ckpt);

// Sequence-level data parallelism for training loops: each worker owns a full
// parameter clone, accumulates gradients locally, and the pool merges clone
// gradients into the master in fixed worker order, so results depend on the
// configured thread count but never on scheduling.
class GradWorkerPool {
public:
    GradWorkerPool(Checkpoint& master, int workers);
    // job(worker_checkpoint, slot) runs forward+backward for one batch slot
    // and returns its loss contribution. Returns the summed loss in slot order
    // within workers, worker-major.
    float run(int slots, const std::function<float(Checkpoint&, int)>& job);
    void sync_clones();
    int workers() const { return static_cast<int>(clones_.size()) + 1; }

private:
    Checkpoint& master_;
    std::vector<Checkpoint> clones_;
};

struct TrainReport {
    std::vector<float> losses;  // one entry per step
};

// Causal-LM training with Adam. Deterministic: identical inputs and seed give
// a bit-identical checkpoint.
TrainReport train_lm_inplace(Checkpoint& ckpt, const std::vector<std::vector<int>>& corpus,
                             const TrainHyper& hyper);
std::pair<Checkpoint, TrainReport> train_lm(const ModelConfig& cfg,
                                            const std::vector<std::vector<int>>& corpus,
                                            const TrainHyper& hyper);

struct GenerateMode {
    bool greedy = true;
    float temperature = 0.0f;
    std::uint64_t seed = 0;
};

std::vector<int> generate(const Checkpoint& ckpt, std::span<const int> prompt, int max_new,
                          const GenerateMode& mode, int stop_token = -1,
                          const AdapterSet<float>* adapters = nullptr);

// Checkpoint file format: directory with manifest.json plus a flat
// little-endian float32 array file params.bin.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
std::uint64_t checkpoint_digest(const Checkpoint& ckpt);

// Activation dumps share the manifest + flat-array convention, so externally
// produced residual streams can be analyzed in place of the toy model's.
void save_activation_records(const std::vector<ActivationRecord>& records,
                             const std::string& path);
std::vector<ActivationRecord> load_activation_records(const std::string& path);

}  // namespace tomlab::lm
