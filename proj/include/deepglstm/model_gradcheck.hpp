#pragma once

// Finite-difference check of the full network in double precision on a tiny
// instance: a 3-atom drug and a 10-residue protein, squared error against a
// fixed target, eval mode (no dropout).

#include <cstdint>
#include <string>

#include "gradcheck.hpp"
#include "model.hpp"

namespace deepglstm {

struct ModelGradCheck {
    ad::GradCheckResult result;
    double loss = 0.0;
    std::size_t parameters = 0;
};

inline ModelGradCheck model_gradcheck(std::uint64_t seed, ad::GradCheckOptions opt = {},
                                      const std::string& smiles = "CCO", std::size_t protein_len = 10,
                                      ModelConfig config = {}) {
    config.max_len = protein_len;
    auto params = init_params<double>(seed, config);
    Rng rng(seed ^ 0x5EEDu);
    std::string residues;
    for (std::size_t i = 0; i < protein_len; ++i) residues.push_back(static_cast<char>('A' + rng.below(26)));
    const auto drug = build_graph_inputs<double>(chem::parse_smiles(smiles), config.power_mode);
    const auto protein = tokenize(residues, protein_len);
    const double target = predict(params, drug, protein) + 1.0;

    auto loss_fn = [&] {
        Rng unused(0);
        const auto pred = predict_batch<double>(params, {&drug}, {&protein}, Mode::Eval, unused);
        return ad::mse(pred, ad::Value<double>::constant(Tensor<double>(1, 1, target)));
    };
    auto trainable = params.trainable();
    opt.seed = seed;
    ModelGradCheck out;
    out.result = ad::finite_difference_check(loss_fn, std::span(trainable), opt);
    out.loss = loss_fn().item();
    out.parameters = params.parameter_count();
    return out;
}

}  // namespace deepglstm
