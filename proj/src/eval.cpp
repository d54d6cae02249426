#include "afs/eval.hpp"

#include "afs/error.hpp"

namespace afs {

namespace {

template <typename MakeInputs>
double accuracy_walk(const LogitsFn& model, const Dataset& ds,
                     const std::vector<std::int32_t>& idx, int batch_size, MakeInputs&& inputs) {
    if (idx.empty()) fail_data("accuracy: empty evaluation set");
    std::size_t correct = 0;
    std::size_t batch_no = 0;
    for (std::size_t first = 0; first < idx.size(); first += static_cast<std::size_t>(batch_size)) {
        const std::size_t count = std::min<std::size_t>(batch_size, idx.size() - first);
        std::vector<int> y;
        Tensor x = make_batch(ds, idx, first, count, y);
        Tensor x_eval = inputs(x, y, batch_no++);
        const auto pred = argmax_rows(model(x_eval));
        for (std::size_t i = 0; i < count; ++i)
            if (pred[i] == y[i]) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(idx.size());
}

}  // namespace

double clean_accuracy(const LogitsFn& model, const Dataset& ds,
                      const std::vector<std::int32_t>& idx, int batch_size) {
    return accuracy_walk(model, ds, idx, batch_size,
                         [](const Tensor& x, const std::vector<int>&, std::size_t) { return x; });
}

double robust_accuracy(const LogitsFn& model, const Dataset& ds,
                       const std::vector<std::int32_t>& idx, const AttackConfig& cfg,
                       const SeededRng& rng, int batch_size) {
    BatchLossFn loss = make_ce_loss(model);
    return accuracy_walk(model, ds, idx, batch_size,
                         [&](const Tensor& x, const std::vector<int>& y, std::size_t batch_no) {
                             return pgd_attack(loss, x, y, cfg, rng.fork(batch_no));
                         });
}

}  // namespace afs
