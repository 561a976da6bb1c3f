// Writes a randomly initialised bundle: extractor widths, then autoencoder widths.
//   standda-random-bundle out.json --extractor 10,8,4 --autoencoder 4,2,4 --seed 11
#include "standda/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"random weight bundle"};
    standda::RandomBundleSpec spec;
    std::string path;
    app.add_option("path", path, "output bundle")->required();
    app.add_option("--extractor", spec.extractor, "extractor widths")->delimiter(',');
    app.add_option("--autoencoder", spec.autoencoder, "autoencoder widths")->delimiter(',');
    app.add_option("--seed", spec.seed, "initialisation seed");
    app.add_option("--bias-scale", spec.biasScale, "bias standard deviation");
    app.add_flag("!--no-final-relu", spec.extractorFinalRelu, "no ReLU after the last extractor layer");
    CLI11_PARSE(app, argc, argv);
    try {
        standda::save_bundle(standda::make_random_bundle(spec), path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
