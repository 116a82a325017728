// Writes a self-contained offline workspace (corpus, queries, scripted
// providers, config) that `ragattack attack` and `ragattack run` accept.
#include <CLI11.hpp>

#include <iostream>

#include "demo_fixture.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Create a scripted demo workspace"};
    std::string dir;
    std::string attack = "paradox";
    std::uint64_t seed = 7;
    std::size_t n_docs = 200;
    app.add_option("dir", dir, "output directory")->required();
    app.add_option("--attack", attack, "paradox, prepend or none")->check(CLI::IsMember({"paradox", "prepend", "none"}));
    app.add_option("--seed", seed, "corpus and judging seed");
    app.add_option("--docs", n_docs, "corpus size")->check(CLI::Range(30, 100000));
    CLI11_PARSE(app, argc, argv);

    auto fixture = ragattack::demo::make_fixture(seed, n_docs);
    auto cfg = ragattack::demo::write_workspace(fixture, dir, attack, seed);
    std::cout << "wrote " << cfg.string() << "\n";
    return 0;
}
