// Command-line front end: train, infer, eval.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "relume/datasets/datasets.hpp"
#include "relume/imaging/io.hpp"
#include "relume/metrics/metrics.hpp"
#include "relume/trainer/trainer.hpp"

namespace fs = std::filesystem;
using namespace relume;

namespace {

// backend spec: "stub:<seed>" or "pretrained:<weights path>"
std::shared_ptr<tad::VlBackend<float>> open_backend(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (kind == "stub") {
        std::uint64_t seed = 0;
        if (!arg.empty()) seed = std::stoull(arg);
        return std::make_shared<tad::StubBackend<float>>(seed);
    }
    if (kind == "pretrained") {
        if (arg.empty()) throw ConfigError("pretrained backend needs a weights path");
        return std::make_shared<tad::PretrainedBackend<float>>(arg);
    }
    throw ConfigError("unknown backend spec: " + spec + " (use stub:<seed> or pretrained:<path>)");
}

trainer::TrainingConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw NotFoundError("config file not found: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return trainer::parse_config(ss.str());
}

std::vector<std::string> collect_inputs(const std::string& path) {
    if (fs::is_directory(path)) return datasets::detail::list_images(path);
    if (!fs::exists(path)) throw NotFoundError("input not found: " + path);
    return {path};
}

int run_train(const std::string& low_dir, const std::string& high_dir, const std::string& out_dir,
              trainer::TrainingConfig cfg, const std::string& backend_spec,
              const std::string& resume, int steps_per_epoch) {
    trainer::validate(cfg);
    fs::create_directories(out_dir);
    auto backend = open_backend(backend_spec);
    std::unique_ptr<trainer::TrainerState> st =
        resume.empty() ? trainer::make_trainer(cfg, backend)
                       : trainer::load_checkpoint(resume, backend, cfg);
    datasets::UnpairedCorpus corpus = datasets::open_corpus(low_dir, high_dir, cfg.patch);
    const int epoch_steps = steps_per_epoch > 0 ? steps_per_epoch : corpus.epoch_length();

    std::ofstream log(fs::path(out_dir) / "train_log.jsonl", std::ios::app);
    if (!log) throw IoError("cannot open training log in " + out_dir);
    std::printf("training: %d epochs x %d steps, %zu low / %zu high images\n", cfg.epochs,
                epoch_steps, corpus.low_files.size(), corpus.high_files.size());

    for (long long epoch = st->epoch; epoch < cfg.epochs; ++epoch) {
        st->epoch = epoch;
        double epoch_total = 0;
        for (int i = 0; i < epoch_steps; ++i) {
            auto [i_l, i_h] = datasets::sample_training_pair(
                corpus, Rng::mix(cfg.seed, static_cast<std::uint64_t>(epoch),
                                 static_cast<std::uint64_t>(i)));
            losses::LossReport rep = trainer::train_step(*st, i_l, i_h);
            losses::write_jsonl_line(log, rep);
            epoch_total += rep.total;
        }
        log.flush();
        st->epoch = epoch + 1;
        std::printf("epoch %lld/%d  lr %.3e  mean total %.4f\n", epoch + 1, cfg.epochs,
                    trainer::lr_at(cfg, epoch), epoch_total / epoch_steps);
        if ((epoch + 1) % cfg.checkpoint_every == 0 || epoch + 1 == cfg.epochs) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_epoch%04lld.ckpt", epoch + 1);
            trainer::save_checkpoint(*st, (fs::path(out_dir) / name).string());
            trainer::save_checkpoint(*st, (fs::path(out_dir) / "latest.ckpt").string());
        }
    }
    std::printf("done; checkpoints and train_log.jsonl in %s\n", out_dir.c_str());
    return 0;
}

int run_infer(const std::string& checkpoint, const std::string& input, const std::string& out_dir,
              const std::string& backend_spec) {
    auto st = trainer::load_checkpoint(checkpoint, open_backend(backend_spec));
    fs::create_directories(out_dir);
    for (const std::string& path : collect_inputs(input)) {
        imaging::ImageTensor img = imaging::load_image(path);
        imaging::ImageTensor out = trainer::infer(*st, img);
        const std::string name = fs::path(path).stem().string() + ".png";
        imaging::save_image(out, (fs::path(out_dir) / name).string());
        std::printf("%s -> %s\n", path.c_str(), name.c_str());
    }
    return 0;
}

int run_eval(const std::string& images_dir, const std::string& originals_dir,
             const std::string& refs_dir, const std::string& out_csv,
             const std::string& niqe_model_path, const std::string& backend_spec,
             const std::string& prompt_low, const std::string& prompt_high) {
    auto backend = open_backend(backend_spec);
    tad::PromptPair<float> prompts = tad::make_prompt_pair(*backend, prompt_low, prompt_high);
    std::unique_ptr<metrics::NiqeModel> niqe_model;
    if (!niqe_model_path.empty())
        niqe_model = std::make_unique<metrics::NiqeModel>(metrics::load_niqe_model(niqe_model_path));

    std::vector<metrics::MetricRow> rows;
    for (const std::string& path : datasets::detail::list_images(images_dir)) {
        const std::string name = fs::path(path).filename().string();
        imaging::ImageTensor img = imaging::load_image(path);
        metrics::MetricRow row;
        row.name = name;
        if (!refs_dir.empty()) {
            imaging::ImageTensor ref = imaging::load_image((fs::path(refs_dir) / name).string());
            row.psnr = metrics::psnr(img, ref);
            row.ssim = metrics::ssim(img, ref);
        }
        if (!originals_dir.empty()) {
            imaging::ImageTensor orig =
                imaging::load_image((fs::path(originals_dir) / name).string());
            row.loe = metrics::loe(img, orig);
        }
        if (niqe_model) row.niqe = metrics::niqe(img, *niqe_model);
        row.semantic = metrics::semantic_score(img, *backend, prompts);
        rows.push_back(std::move(row));
    }
    metrics::MetricReport rep = metrics::assemble_report(std::move(rows));
    std::ofstream csv(out_csv);
    if (!csv) throw IoError("cannot write " + out_csv);
    metrics::write_csv(csv, rep);
    metrics::write_csv(std::cout, rep);
    std::printf("wrote %s (%zu images)\n", out_csv.c_str(), rep.rows.size());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"unsupervised low-light enhancement: train, infer, eval"};
    app.require_subcommand(1);

    // train
    auto* t = app.add_subcommand("train", "train the enhancement model");
    std::string low_dir, high_dir, out_dir = "runs/default", config_path, resume;
    std::string backend_spec = "stub:0";
    int steps_per_epoch = 0;
    trainer::TrainingConfig cfg;
    t->add_option("--low-dir", low_dir, "directory of low-light images")->required();
    t->add_option("--high-dir", high_dir, "directory of normal-light images")->required();
    t->add_option("--out", out_dir, "run directory for checkpoints and logs");
    t->add_option("--config", config_path, "key=value config file");
    t->add_option("--resume", resume, "checkpoint to resume from");
    t->add_option("--backend", backend_spec, "stub:<seed> or pretrained:<weights>");
    t->add_option("--steps-per-epoch", steps_per_epoch, "override steps per epoch (0 = corpus size)");
    t->add_option("--epochs", cfg.epochs);
    t->add_option("--lr", cfg.lr);
    t->add_option("--patch", cfg.patch);
    t->add_option("--pe-levels", cfg.pe_levels, "positional encoding frequency count");
    t->add_option("--seed", cfg.seed);
    t->add_option("--checkpoint-every", cfg.checkpoint_every);
    t->add_option("--prompt-low", cfg.prompt_low);
    t->add_option("--prompt-high", cfg.prompt_high);

    // infer
    auto* inf = app.add_subcommand("infer", "enhance images with a trained checkpoint");
    std::string checkpoint, input, infer_out = "out";
    std::string infer_backend = "stub:0";
    inf->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    inf->add_option("--input", input, "image file or directory")->required();
    inf->add_option("--out", infer_out, "output directory");
    inf->add_option("--backend", infer_backend, "stub:<seed> or pretrained:<weights>");

    // eval
    auto* ev = app.add_subcommand("eval", "score an image directory");
    std::string images_dir, originals_dir, refs_dir, out_csv = "metrics.csv";
    std::string niqe_model_path = "data/niqe_pristine.bin";
    std::string eval_backend = "stub:0", prompt_low = "low-light image",
                prompt_high = "high-light image";
    ev->add_option("--images", images_dir, "directory of enhanced images")->required();
    ev->add_option("--originals", originals_dir, "matching inputs, enables LOE");
    ev->add_option("--refs", refs_dir, "matching references, enables PSNR/SSIM");
    ev->add_option("--out", out_csv, "output table path");
    ev->add_option("--niqe-model", niqe_model_path, "pristine NSS model ('' disables NIQE)");
    ev->add_option("--backend", eval_backend, "stub:<seed> or pretrained:<weights>");
    ev->add_option("--prompt-low", prompt_low);
    ev->add_option("--prompt-high", prompt_high);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*t) {
            if (!config_path.empty()) {
                trainer::TrainingConfig file_cfg = load_config_file(config_path);
                // explicit flags override file values
                auto keep = [&](const char* flag) { return t->count(flag) > 0; };
                if (!keep("--epochs")) cfg.epochs = file_cfg.epochs;
                if (!keep("--lr")) cfg.lr = file_cfg.lr;
                if (!keep("--patch")) cfg.patch = file_cfg.patch;
                if (!keep("--pe-levels")) cfg.pe_levels = file_cfg.pe_levels;
                if (!keep("--seed")) cfg.seed = file_cfg.seed;
                if (!keep("--checkpoint-every")) cfg.checkpoint_every = file_cfg.checkpoint_every;
                if (!keep("--prompt-low")) cfg.prompt_low = file_cfg.prompt_low;
                if (!keep("--prompt-high")) cfg.prompt_high = file_cfg.prompt_high;
                cfg.adam_beta1 = file_cfg.adam_beta1;
                cfg.adam_beta2 = file_cfg.adam_beta2;
                cfg.adam_eps = file_cfg.adam_eps;
                cfg.w_nr = file_cfg.w_nr;
                cfg.w_adv = file_cfg.w_adv;
                cfg.w_con = file_cfg.w_con;
                cfg.w_cl = file_cfg.w_cl;
            }
            return run_train(low_dir, high_dir, out_dir, cfg, backend_spec, resume,
                             steps_per_epoch);
        }
        if (*inf) return run_infer(checkpoint, input, infer_out, infer_backend);
        if (*ev)
            return run_eval(images_dir, originals_dir, refs_dir, out_csv, niqe_model_path,
                            eval_backend, prompt_low, prompt_high);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
