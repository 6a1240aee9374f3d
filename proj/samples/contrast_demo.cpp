// Decodes one question with and without an amateur contrast on the seeded
// synthetic backend, and shows the first step where the choice flips.
//
//   ./contrast_demo [alpha]

#include "ccot/ccot.hpp"

#include <cstdlib>
#include <iostream>

int main(int argc, char ** argv) {
    const double alpha = argc > 1 ? std::atof(argv[1]) : 0.8;

    std::vector<ccot::exemplar> exemplars = {
        { "There are 15 trees. After planting there are 21. How many were planted?",
          "There are 21 - 15 = 6 trees planted.", "The answer is 6." },
        { "Leah had 32 chocolates and her sister had 42. They ate 35. How many are left?",
          "They had 32 + 42 = 74. After eating 35 they have 74 - 35 = 39.", "The answer is 39." },
    };

    ccot::synthetic_backend model(ccot::synthetic_options{ 7 });
    const auto bundle = ccot::build_bundle("demo", { ccot::amateur_kind::no_context }, exemplars,
                                           "Olivia has $23. She buys 5 bagels for $3 each. How much is left?", {},
                                           exemplars.size());

    ccot::generation_config cfg;
    cfg.max_new_tokens = 24;
    cfg.record_steps   = true;

    const auto base = ccot::generate_baseline(model, bundle, cfg);
    cfg.contrast.alpha = alpha;
    const auto contrasted = ccot::generate(model, model, bundle, cfg);

    std::cout << "baseline:   " << base.text << "\n";
    std::cout << "alpha " << alpha << ": " << contrasted.text << "\n";
    std::cout << "flipped " << contrasted.flip_count() << " of " << contrasted.steps.size() << " steps\n";
    for (std::size_t i = 0; i < contrasted.steps.size(); ++i) {
        if (contrasted.steps[i].flipped) {
            std::cout << "first flip at step " << i << "\n";
            break;
        }
    }
}
