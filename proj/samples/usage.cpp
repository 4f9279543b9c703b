// Erase a continuous concept from the synthetic dataset and report how much
// of it a probe can still recover.

#include <iostream>

#include <erasekit/erasekit.hpp>

int main()
{
    using namespace erasekit;

    const Dataset ds = gen_synthetic_continuous(2000, 20, 7);

    KramConfig cfg;
    cfg.kernel = {KernelFamily::gaussian, DistanceMetric::absolute, 0.5};
    cfg.epochs = 5;
    cfg.batch_size = 250;
    cfg.seed = 7;

    const TrainResult result = train(ds.features, ds.labels, cfg);
    const FeatureMatrix z = erase(result.network, ds.features);

    const auto before = train_probe(ds.features, ds.labels, ProbeKind::mlp, 1);
    const auto after = train_probe(z, ds.labels, ProbeKind::mlp, 1);
    const auto align = alignment_score(ds.features, z, default_alignment_k(ds.size()));

    std::cout << "concept MSE before " << before.value << ", after " << after.value << "\n"
              << "A_k " << align.a_k << " (k = " << align.k << ")\n";
}
