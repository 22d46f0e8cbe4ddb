#include <CLI11.hpp>
#include <iostream>

#include "lesanet/commands.hpp"

namespace {

struct RunArgs {
  std::string config;
  std::string out_dir;
  std::vector<std::string> overrides;
  bool no_spl = false, no_rhem = false, no_expand = false, no_relevance_filter = false, no_triplet = false,
       rhem_all_negatives = false;
};

void add_run_options(CLI::App* cmd, RunArgs& a, bool ablations) {
  cmd->add_option("-c,--config", a.config, "Run configuration (INI)");
  cmd->add_option("-o,--out", a.out_dir, "Output directory (created; must be empty)")->required();
  cmd->add_option("--set", a.overrides, "Override a key, section.key=value");
  if (!ablations) return;
  cmd->add_flag("--no-spl", a.no_spl, "Disable score propagation; score with sigmoid(s)");
  cmd->add_flag("--no-rhem", a.no_rhem, "Disable relational hard example mining");
  cmd->add_flag("--no-expand", a.no_expand, "Train on mined labels without ontology expansion");
  cmd->add_flag("--no-relevance-filter", a.no_relevance_filter, "Keep irrelevant mined labels");
  cmd->add_flag("--no-triplet", a.no_triplet, "Disable the triplet loss");
  cmd->add_flag("--rhem-all-negatives", a.rhem_all_negatives, "Mine over all labels, not reliable negatives");
}

lesanet::RunConfig resolve(const RunArgs& a) {
  auto overrides = lesanet::ablation_overrides(a.no_spl, a.no_rhem, a.no_expand, a.no_relevance_filter,
                                               a.no_triplet, a.rhem_all_negatives);
  overrides.insert(overrides.end(), a.overrides.begin(), a.overrides.end());
  return a.config.empty() ? lesanet::run_config_from_overrides(overrides)
                          : lesanet::load_run_config(a.config, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilabel lesion annotation with an ontology-aware loss"};
  app.require_subcommand(1);

  std::string onto_action, onto_file, sets_file;
  auto* onto = app.add_subcommand("ontology", "Validate an ontology, expand label sets, list exclusive pairs");
  onto->add_option("action", onto_action, "validate | expand | closure")
      ->required()
      ->check(CLI::IsMember({"validate", "expand", "closure"}));
  onto->add_option("ontology", onto_file, "Ontology file")->required();
  onto->add_option("sets", sets_file, "Label sets to expand, one comma-separated set per line");

  std::string sentences, mine_onto, mine_out;
  auto* mine = app.add_subcommand("mine", "Extract labels and relevance from bookmarked sentences");
  mine->add_option("sentences", sentences, "lesion_id<TAB>sentence lines")->required();
  mine->add_option("-O,--ontology", mine_onto, "Ontology file")->required();
  mine->add_option("-o,--out", mine_out, "Mined label file to write")->required();

  RunArgs gen_args, train_args, eval_args, retr_args;
  std::size_t k = 5;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  add_run_options(gen, gen_args, false);
  auto* train = app.add_subcommand("train", "Train a model and calibrate thresholds");
  add_run_options(train, train_args, true);
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  add_run_options(eval, eval_args, false);
  auto* retr = app.add_subcommand("retrieve", "Nearest-neighbour retrieval of test lesions from the train split");
  add_run_options(retr, retr_args, false);
  retr->add_option("-k,--k", k, "Neighbours per query")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*onto) {
      auto action = onto_action == "validate" ? lesanet::OntologyAction::kValidate
                    : onto_action == "expand" ? lesanet::OntologyAction::kExpand
                                              : lesanet::OntologyAction::kClosure;
      if (action == lesanet::OntologyAction::kExpand && sets_file.empty()) {
        std::cerr << "error: ontology expand needs a label sets file\n";
        return 2;
      }
      return lesanet::cmd_ontology(action, onto_file, sets_file, std::cout, std::cerr);
    }
    if (*mine) return lesanet::cmd_mine(sentences, mine_onto, mine_out, std::cerr);
    if (*gen) return lesanet::cmd_gen(resolve(gen_args), gen_args.out_dir, std::cout, std::cerr);
    if (*train) return lesanet::cmd_train(resolve(train_args), train_args.out_dir, std::cout, std::cerr);
    if (*eval) return lesanet::cmd_eval(resolve(eval_args), eval_args.out_dir, std::cout, std::cerr);
    if (*retr) return lesanet::cmd_retrieve(resolve(retr_args), retr_args.out_dir, k, std::cout, std::cerr);
  } catch (const lesanet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
