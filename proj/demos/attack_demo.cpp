// Flip one node's prediction by editing edges around it, leaving its own row alone.

#include "angcn/all.hpp"

#include <iostream>

using namespace angcn;

int main(int argc, char** argv) {
    const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 0;
    const Graph g = synth_graph(SynthSpec::sbm({50, 50}, 0.1, 0.01, seed));

    SemiGcnModel m = make_semi_model(g.n_features(), 16, 2, seed);
    train_model(m, g, TrainConfig{});
    const SemiGcnModel target = freeze(m);

    const Matrix a = build_adjacency(g);
    const auto clean = predict_semi(target, a, g.features());
    const std::size_t t = g.masks().test.front();

    AttackSpec spec;
    spec.targets = {t};
    spec.desired_labels = {1 - clean[t]};
    spec.seed = seed;
    const AttackResult r = run_attack(target, g, spec);

    std::cout << "target node " << t << ": " << clean[t] << " -> " << r.attacked_predictions[t]
              << (r.all_success() ? " (flipped)" : " (not flipped)") << '\n';
    std::cout << "edges added " << r.edits_added.size() << ", removed " << r.edits_removed.size() << '\n';
    for (const Edge& e : r.edits_added) std::cout << "  + " << e.u << '-' << e.v << '\n';
    for (const Edge& e : r.edits_removed) std::cout << "  - " << e.u << '-' << e.v << '\n';

    std::size_t moved = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) moved += i != t && r.attacked_predictions[i] != clean[i];
    std::cout << "other nodes whose label changed: " << moved << '\n';
    return r.all_success() ? 0 : 1;
}
