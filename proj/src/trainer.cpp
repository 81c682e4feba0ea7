#include "rasor/trainer.hpp"

#include <atomic>
#include <sstream>
#include <thread>

namespace rasor {

namespace {

std::vector<std::size_t> epoch_permutation(std::uint64_t seed, long epoch,
                                           std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(mix_seed(seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
  shuffle(perm, rng);
  return perm;
}

// batch of example indices for global step s, derived entirely from
// (seed, s) so that resumed and asynchronous runs agree on batch membership
std::vector<std::size_t> batch_for_step(const TrainConfig& cfg,
                                        std::size_t n, long s,
                                        std::vector<std::size_t>& perm_cache,
                                        long& cached_epoch) {
  long bpe = static_cast<long>((n + cfg.batch_size - 1) / cfg.batch_size);
  long epoch = s / bpe;
  long pos = s % bpe;
  if (epoch != cached_epoch) {
    perm_cache = epoch_permutation(cfg.seed, epoch, n);
    cached_epoch = epoch;
  }
  std::size_t lo = static_cast<std::size_t>(pos) * cfg.batch_size;
  std::size_t hi = std::min(n, lo + cfg.batch_size);
  return {perm_cache.begin() + lo, perm_cache.begin() + hi};
}

// accumulates d(mean loss)/d(params) into the store's grad buffers and
// returns the batch-mean loss value
double batch_backward(const QaModel<float>& qa,
                      const std::vector<const TokenizedExample*>& batch,
                      Rng& drop_rng) {
  double loss_sum = 0;
  float inv = 1.0f / static_cast<float>(batch.size());
  for (const TokenizedExample* ex : batch) {
    Graph<float> g;
    auto loss = qa.example_loss(g, *ex, /*training=*/true, &drop_rng);
    if (!loss) continue;  // gold not representable; contributes nothing
    loss_sum += static_cast<double>(g.value(*loss).v[0]);
    g.backward(g.scale(*loss, inv));
  }
  return loss_sum / static_cast<double>(batch.size());
}

std::string step_line(const StepRecord& r, long skipped) {
  std::ostringstream os;
  os << "step=" << r.step << " loss=" << r.loss << " lr=" << r.lr
     << " skipped_nonfinite=" << skipped;
  return os.str();
}

}  // namespace

Checkpoint make_checkpoint(const QaModel<float>& qa,
                           const AdamState<float>& opt, long step,
                           long dropped_unalignable) {
  Checkpoint ckpt;
  ckpt.config = qa.cfg;
  ckpt.step = step;
  ckpt.skipped_nonfinite = opt.skipped_nonfinite;
  ckpt.dropped_unalignable = dropped_unalignable;
  ckpt.skipped_long_gold = qa.skipped_long_gold();
  for (std::size_t i = 0; i < qa.store.count(); ++i) {
    const auto& e = qa.store.entry(i);
    ckpt.tensors.push_back(to_blob("param/" + e.name, e.tensor));
    TensorBlob m{"adam_m/" + e.name, e.tensor.shape, opt.m[i]};
    TensorBlob v{"adam_v/" + e.name, e.tensor.shape, opt.v[i]};
    ckpt.tensors.push_back(std::move(m));
    ckpt.tensors.push_back(std::move(v));
  }
  ckpt.tensors.push_back(
      TensorBlob{"adam_t", Shape{1}, {static_cast<float>(opt.t)}});
  return ckpt;
}

void resume_from_checkpoint(const Checkpoint& ckpt, QaModel<float>& qa,
                            AdamState<float>& opt, long& step) {
  apply_param_blobs(ckpt, qa.store);
  opt.init(qa.store);
  for (std::size_t i = 0; i < qa.store.count(); ++i) {
    const auto& name = qa.store.entry(i).name;
    for (auto [vec, prefix] :
         {std::pair{&opt.m[i], "adam_m/"}, std::pair{&opt.v[i], "adam_v/"}}) {
      const TensorBlob* blob = ckpt.find(prefix + name);
      if (!blob)
        throw FormatError("checkpoint: missing tensor " + (prefix + name));
      if (blob->shape != qa.store.entry(i).tensor.shape)
        throw FormatError("checkpoint: tensor " + (prefix + name) +
                          " has shape " + shape_str(blob->shape) +
                          ", model expects " +
                          shape_str(qa.store.entry(i).tensor.shape));
      *vec = blob->data;
    }
  }
  const TensorBlob* t = ckpt.find("adam_t");
  if (!t) throw FormatError("checkpoint: missing tensor adam_t");
  opt.t = static_cast<long>(t->data[0]);
  opt.skipped_nonfinite = ckpt.skipped_nonfinite;
  qa.model.skipped_long_gold = ckpt.skipped_long_gold;
  step = ckpt.step;
}

namespace {

TrainResult run_deterministic(const TrainConfig& cfg,
                              const PreparedDataset& data,
                              QaModel<float>& qa, AdamState<float>& opt,
                              long step, const CheckpointSink& on_checkpoint,
                              const LogSink& log) {
  AdamParams ap = AdamParams::from(cfg);
  std::size_t n = data.examples.size();
  TrainResult result;
  std::vector<std::size_t> perm;
  long cached_epoch = -1;
  for (; step < cfg.max_steps; ++step) {
    auto idx = batch_for_step(cfg, n, step, perm, cached_epoch);
    std::vector<const TokenizedExample*> batch;
    for (std::size_t i : idx) batch.push_back(&data.examples[i]);
    qa.store.zero_grads();
    Rng drop_rng(
        mix_seed(cfg.seed, kDropoutStream, static_cast<std::uint64_t>(step)));
    double mean = batch_backward(qa, batch, drop_rng);
    double lr = effective_lr(ap, opt.t);
    if (!adam_step(qa.store, opt, ap, lr, cfg.grad_clip) && log)
      log("warning=non_finite_gradients step=" + std::to_string(step) +
          " action=skipped");
    result.processed_examples += static_cast<long>(batch.size());
    StepRecord rec{step, mean, lr};
    result.steps.push_back(rec);
    if (log) log(step_line(rec, opt.skipped_nonfinite));
    if (on_checkpoint && (step + 1) % cfg.eval_interval == 0)
      on_checkpoint(
          make_checkpoint(qa, opt, step + 1, data.dropped_unalignable));
  }
  result.checkpoint =
      make_checkpoint(qa, opt, step, data.dropped_unalignable);
  return result;
}

// Hogwild-style workers: every scalar read/write of shared parameters and
// moments goes through std::atomic_ref (relaxed), so values are never torn,
// but updates may interleave freely — last writer wins.
TrainResult run_async(const TrainConfig& cfg, const PreparedDataset& data,
                      QaModel<float>& qa, AdamState<float>& opt, long start,
                      const CheckpointSink& on_checkpoint,
                      const LogSink& log) {
  AdamParams ap = AdamParams::from(cfg);
  std::size_t n = data.examples.size();
  std::atomic<long> next_step{start};
  std::atomic<long> adam_t{opt.t};
  std::atomic<long> skipped{opt.skipped_nonfinite};
  std::atomic<long> processed{0};

  auto worker = [&]() {
    QaModel<float> local(cfg, qa.emb);
    std::vector<std::size_t> perm;
    long cached_epoch = -1;
    for (;;) {
      long s = next_step.fetch_add(1, std::memory_order_relaxed);
      if (s >= cfg.max_steps) break;
      // snapshot shared parameters (torn-free scalar reads)
      for (std::size_t e = 0; e < qa.store.count(); ++e) {
        const auto& src = qa.store.entry(e).tensor.v;
        auto& dst = local.store.entry(e).tensor.v;
        for (std::size_t i = 0; i < src.size(); ++i)
          dst[i] = std::atomic_ref<const float>(src[i]).load(
              std::memory_order_relaxed);
      }
      auto idx = batch_for_step(cfg, n, s, perm, cached_epoch);
      std::vector<const TokenizedExample*> batch;
      for (std::size_t i : idx) batch.push_back(&data.examples[i]);
      local.store.zero_grads();
      Rng drop_rng(mix_seed(cfg.seed, kDropoutStream,
                            static_cast<std::uint64_t>(s)));
      batch_backward(local, batch, drop_rng);
      processed.fetch_add(static_cast<long>(batch.size()),
                          std::memory_order_relaxed);

      bool finite = true;
      for (std::size_t e = 0; e < local.store.count() && finite; ++e)
        for (const float& g : local.store.entry(e).tensor.g)
          if (!std::isfinite(g)) {
            finite = false;
            break;
          }
      if (!finite) {
        skipped.fetch_add(1, std::memory_order_relaxed);
        continue;
      }
      long t = adam_t.fetch_add(1, std::memory_order_relaxed) + 1;
      double lr = effective_lr(ap, t - 1);
      double bc1 = 1.0 - std::pow(ap.beta1, static_cast<double>(t));
      double bc2 = 1.0 - std::pow(ap.beta2, static_cast<double>(t));
      for (std::size_t e = 0; e < qa.store.count(); ++e) {
        auto& shared = qa.store.entry(e).tensor.v;
        const auto& grad = local.store.entry(e).tensor.g;
        for (std::size_t i = 0; i < shared.size(); ++i) {
          double g = grad[i];
          std::atomic_ref<float> m(opt.m[e][i]), v(opt.v[e][i]),
              p(shared[i]);
          double mi = ap.beta1 * m.load(std::memory_order_relaxed) +
                      (1 - ap.beta1) * g;
          double vi = ap.beta2 * v.load(std::memory_order_relaxed) +
                      (1 - ap.beta2) * g * g;
          m.store(static_cast<float>(mi), std::memory_order_relaxed);
          v.store(static_cast<float>(vi), std::memory_order_relaxed);
          double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + ap.epsilon);
          p.store(static_cast<float>(p.load(std::memory_order_relaxed) -
                                     update),
                  std::memory_order_relaxed);
        }
      }
    }
  };

  std::vector<std::thread> threads;
  for (int w = 0; w < cfg.workers; ++w) threads.emplace_back(worker);
  for (auto& th : threads) th.join();

  opt.t = adam_t.load();
  opt.skipped_nonfinite = skipped.load();
  TrainResult result;
  result.processed_examples = processed.load();
  result.checkpoint =
      make_checkpoint(qa, opt, cfg.max_steps, data.dropped_unalignable);
  if (on_checkpoint) on_checkpoint(result.checkpoint);
  if (log)
    log("async_done steps=" + std::to_string(cfg.max_steps - start) +
        " processed=" + std::to_string(result.processed_examples));
  return result;
}

}  // namespace

TrainResult train_loop(const TrainConfig& cfg, const PreparedDataset& data,
                       const EmbeddingStore& emb, const Checkpoint* resume,
                       const CheckpointSink& on_checkpoint,
                       const LogSink& log) {
  cfg.validate();
  if (data.examples.empty())
    throw ConfigError("train: dataset is empty");
  for (const auto& ex : data.examples)
    if (!ex.gold)
      throw ConfigError("train: example " + ex.id +
                        " has no aligned gold span");
  QaModel<float> qa(cfg, &emb);
  AdamState<float> opt;
  opt.init(qa.store);
  long step = 0;
  if (resume) resume_from_checkpoint(*resume, qa, opt, step);
  if (cfg.workers > 1)
    return run_async(cfg, data, qa, opt, step, on_checkpoint, log);
  return run_deterministic(cfg, data, qa, opt, step, on_checkpoint, log);
}

}  // namespace rasor
