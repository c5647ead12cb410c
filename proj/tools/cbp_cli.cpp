// cbp: generate paired-view data, train and evaluate fusion classifiers,
// benchmark fusion methods, and run the built-in oracle checks.

#include <cbp/checks.hpp>
#include <cbp/harness.hpp>
#include <cbp/io.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct TrainFlags {
  double lr = 0.1;
  std::size_t epochs = 30;
  std::size_t batch = 32;
  double alpha = 1.0;
  std::size_t sketch_dim = cbp::harness::kDefaultSketchDim;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--lr", f.lr, "SGD learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--epochs", f.epochs, "training epochs")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--batch", f.batch, "minibatch size")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--alpha", f.alpha, "constant feature scale applied to both views")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("-D,--sketch-dim", f.sketch_dim, "compact bilinear output dimension (power of two)")
      ->capture_default_str();
}

void add_synth_flags(CLI::App* cmd, cbp::harness::SynthConfig& s) {
  cmd->add_option("-C,--dim", s.dim, "feature dimension per view")->capture_default_str();
  cmd->add_option("-L,--classes", s.num_classes, "number of classes")->capture_default_str();
  cmd->add_option("--n-train", s.n_train, "training samples")->capture_default_str();
  cmd->add_option("--n-test", s.n_test, "test samples")->capture_default_str();
  cmd->add_option("--noise", s.noise_sigma, "view-B noise standard deviation")->capture_default_str();
}

cbp::harness::ExperimentConfig experiment_config(const TrainFlags& f, std::uint64_t seed) {
  cbp::harness::ExperimentConfig cfg;
  cfg.sketch_dim = f.sketch_dim;
  cfg.train.learning_rate = f.lr;
  cfg.train.epochs = f.epochs;
  cfg.train.batch_size = f.batch;
  cfg.train.feature_scale = f.alpha;
  cfg.train.shuffle_seed = cbp::Seed{seed};
  cfg.seed = cbp::Seed{seed};
  return cfg;
}

void print_result(const cbp::harness::MethodResult& r) {
  std::cout << std::left << std::setw(10) << r.method << " accuracy " << std::fixed << std::setprecision(4)
            << r.accuracy << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compact bilinear pooling for paired-view feature fusion"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate synthetic paired-view train/test CSVs");
  cbp::harness::SynthConfig gen_cfg;
  std::uint64_t gen_seed = 0;
  std::string gen_train_out = "train.csv", gen_test_out = "test.csv";
  add_synth_flags(gen, gen_cfg);
  gen->add_option("--seed", gen_seed, "root seed")->capture_default_str();
  gen->add_option("--train-out", gen_train_out)->capture_default_str();
  gen->add_option("--test-out", gen_test_out)->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "train one fusion method on a feature CSV");
  TrainFlags train_flags;
  std::string train_in, train_model_out = "model.json", train_method = "compact";
  std::uint64_t train_seed = 0;
  std::optional<std::size_t> train_classes;
  train->add_option("--train", train_in, "training feature CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--method", train_method, "concat|sum|product|full|compact|avg-late")->capture_default_str();
  train->add_option("--seed", train_seed, "seed for hashes, init and shuffling")->capture_default_str();
  train->add_option("-L,--classes", train_classes, "number of classes (default: max label + 1)");
  train->add_option("--model", train_model_out, "output model file")->capture_default_str();
  add_train_flags(train, train_flags);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a saved model on a feature CSV");
  std::string eval_model, eval_test, eval_out;
  eval->add_option("--model", eval_model)->required()->check(CLI::ExistingFile);
  eval->add_option("--test", eval_test, "test feature CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "directory for report.csv and the confusion matrix");

  // bench
  auto* bench = app.add_subcommand("bench", "compare fusion methods on seeded synthetic data");
  cbp::harness::SynthConfig bench_synth;
  TrainFlags bench_flags;
  std::uint64_t bench_seed = 0;
  std::size_t bench_repeats = 5;
  std::vector<std::string> bench_methods = cbp::harness::all_method_tokens();
  std::string bench_out = "bench_out";
  bench->add_option("--seed", bench_seed, "root seed")->required();
  bench->add_option("--repeats", bench_repeats, "independent seed repeats")->capture_default_str();
  bench->add_option("--methods", bench_methods, "methods to compare")->delimiter(',')->capture_default_str();
  bench->add_option("--out", bench_out, "output directory")->capture_default_str();
  add_synth_flags(bench, bench_synth);
  add_train_flags(bench, bench_flags);

  // selftest
  auto* selftest = app.add_subcommand("selftest", "run the oracle and gradient checks");
  cbp::checks::SelftestOptions st_opts;
  selftest->add_option("--seed", st_opts.seed.value)->capture_default_str();
  selftest->add_flag("--inject-sign-flip", st_opts.inject_sign_flip,
                     "corrupt one sketch sign on the fast path (the oracle check must fail)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      gen_cfg.seed = cbp::Seed{gen_seed};
      const auto data = cbp::harness::generate_synthetic(gen_cfg);
      cbp::io::save_features_csv(data.train, gen_train_out);
      cbp::io::save_features_csv(data.test, gen_test_out);
      std::cout << "wrote " << data.train.size() << " train samples to " << gen_train_out << " and "
                << data.test.size() << " test samples to " << gen_test_out << '\n';
      return 0;
    }

    if (*train) {
      const auto data = cbp::io::load_features_csv(train_in, train_classes);
      auto cfg = experiment_config(train_flags, train_seed);
      const auto trained = cbp::harness::train_method(data, train_method, cfg);
      cbp::io::save_model(trained.model, train_model_out);
      std::cout << "trained " << train_method << " on " << data.size() << " samples; final loss "
                << trained.loss_trace.back() << "; model written to " << train_model_out << '\n';
      return 0;
    }

    if (*eval) {
      const auto model = cbp::io::load_model(eval_model);
      const auto data = cbp::io::load_features_csv(eval_test, model.num_classes);
      const auto result = cbp::harness::evaluate_model(model, data);
      print_result(result);
      if (!eval_out.empty()) {
        std::filesystem::create_directories(eval_out);
        const std::filesystem::path dir(eval_out);
        cbp::io::write_file((dir / "report.csv").string(), cbp::harness::report_csv({result}, model.num_classes));
        cbp::io::write_file((dir / ("confusion_" + result.method + ".csv")).string(),
                            cbp::harness::confusion_csv(result));
      }
      return 0;
    }

    if (*bench) {
      bench_synth.seed = cbp::Seed{bench_seed};
      const auto cfg = experiment_config(bench_flags, bench_seed);
      const auto report = cbp::harness::run_bench(bench_synth, bench_methods, cfg, bench_repeats);
      cbp::harness::write_bench_outputs(report, bench_out);
      for (const auto& m : report.methods) {
        std::cout << std::left << std::setw(10) << m.method << " accuracy " << std::fixed << std::setprecision(4)
                  << m.mean_accuracy << " +/- " << m.std_accuracy << '\n';
      }
      std::cout << "reports written to " << bench_out << '\n';
      return 0;
    }

    if (*selftest) {
      bool ok = true;
      for (const auto& r : cbp::checks::run_selftest(st_opts)) {
        std::cout << cbp::checks::format_result(r) << '\n';
        ok = ok && r.passed;
      }
      std::cout << (ok ? "selftest passed" : "selftest FAILED") << '\n';
      return ok ? 0 : 1;
    }
  } catch (const cbp::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const cbp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
