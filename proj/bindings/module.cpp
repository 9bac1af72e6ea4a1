// _momenta: python bindings for the core operations.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "momenta/annotation.hpp"
#include "momenta/demo.hpp"
#include "momenta/error.hpp"
#include "momenta/metrics.hpp"
#include "momenta/pipeline.hpp"
#include "momenta/synth.hpp"

namespace py = pybind11;
using namespace momenta;

namespace {

py::dict report_dict(const MetricsReport& r) {
    py::dict d;
    d["task"] = std::string(to_string(r.task));
    d["num_examples"] = r.num_examples;
    d["accuracy"] = r.accuracy;
    d["macro_f1"] = r.macro_f1;
    d["mmae"] = r.mmae;
    d["per_class_f1"] = r.per_class_f1;
    d["confusion"] = r.confusion;
    return d;
}

py::dict trace_dict(const ForwardTrace& t) {
    py::dict d;
    d["a_v"] = t.a_v;
    d["a_t"] = t.a_t;
    d["f_meme"] = t.f_meme;
    d["logits_harm"] = t.logits_harm;
    d["logits_target"] = t.logits_target;
    d["proposal_weights"] = t.proposal_weights;
    d["attribute_weights"] = t.attribute_weights;
    return d;
}

TrainConfig config_from_kwargs(const py::dict& kwargs) {
    TrainConfig c;
    for (auto item : kwargs) {
        std::string key = py::cast<std::string>(item.first);
        if (key == "batch_size") c.batch_size = py::cast<int>(item.second);
        else if (key == "epochs") c.epochs = py::cast<int>(item.second);
        else if (key == "learning_rate") c.learning_rate = py::cast<double>(item.second);
        else if (key == "focal_gamma") c.focal_gamma = py::cast<double>(item.second);
        else if (key == "lambda_target") c.lambda_target = py::cast<double>(item.second);
        else if (key == "seed") c.seed = py::cast<uint64_t>(item.second);
        else if (key == "c_harm") c.model.c_harm = py::cast<int>(item.second);
        else if (key == "hidden") c.model.hidden = py::cast<int>(item.second);
        else if (key == "variant")
            c.model.variant = parse_variant(py::cast<std::string>(item.second));
        else if (key == "threads") c.threads = py::cast<int>(item.second);
        else if (key == "early_stopping") c.early_stopping = py::cast<bool>(item.second);
        else if (key == "patience") c.patience = py::cast<int>(item.second);
        else throw ConfigError("config-unknown-key", "unknown config key: " + key);
    }
    return c;
}

}  // namespace

PYBIND11_MODULE(_momenta, m) {
    m.doc() = "multimodal harmful-meme classification toolkit";

    py::register_exception<Error>(m, "MomentaError", PyExc_RuntimeError);

    py::enum_<HarmLabel>(m, "HarmLabel")
        .value("harmless", HarmLabel::harmless)
        .value("partially_harmful", HarmLabel::partially_harmful)
        .value("very_harmful", HarmLabel::very_harmful);
    py::enum_<TargetLabel>(m, "TargetLabel")
        .value("individual", TargetLabel::individual)
        .value("organization", TargetLabel::organization)
        .value("community", TargetLabel::community)
        .value("society", TargetLabel::society);
    py::enum_<Split>(m, "Split")
        .value("train", Split::train)
        .value("validation", Split::validation)
        .value("test", Split::test);
    py::enum_<Variant>(m, "Variant")
        .value("full", Variant::full)
        .value("clip_only", Variant::clip_only)
        .value("clip_proposals", Variant::clip_proposals)
        .value("clip_attributes", Variant::clip_attributes)
        .value("no_cmaf", Variant::no_cmaf);

    py::class_<MemeRecord>(m, "MemeRecord")
        .def(py::init<>())
        .def_readwrite("id", &MemeRecord::id)
        .def_readwrite("image_ref", &MemeRecord::image_ref)
        .def_readwrite("ocr_text", &MemeRecord::ocr_text)
        .def_readwrite("harm", &MemeRecord::harm)
        .def_readwrite("target", &MemeRecord::target)
        .def_readwrite("split", &MemeRecord::split)
        .def_readwrite("source", &MemeRecord::source)
        .def_readwrite("width", &MemeRecord::width)
        .def_readwrite("height", &MemeRecord::height);

    py::class_<DatasetManifest>(m, "DatasetManifest")
        .def(py::init<>())
        .def_readwrite("name", &DatasetManifest::name)
        .def_readwrite("schema_version", &DatasetManifest::schema_version)
        .def_readwrite("records", &DatasetManifest::records);

    m.def("ordinal_index", [](HarmLabel h) { return ordinal_index(h); });
    m.def("ordinal_index", [](TargetLabel t) { return ordinal_index(t); });
    m.def("merge_to_binary",
          [](HarmLabel h) { return std::string(to_string(merge_to_binary(h))); });
    m.def("validate_record", [](const MemeRecord& r) {
        py::list issues;
        for (const auto& issue : validate_record(r).issues)
            issues.append(py::make_tuple(issue.field, issue.message));
        return issues;
    });
    m.def("read_manifest", &read_manifest, py::arg("path"));
    m.def("write_manifest", &write_manifest, py::arg("manifest"), py::arg("path"));

    m.def(
        "filter_record",
        [](bool is_english, bool text_readable, bool is_cartoon, bool has_image,
           bool has_text) {
            auto d = filter_record(
                {is_english, text_readable, is_cartoon, has_image, has_text});
            return py::make_tuple(d.keep, d.reason);
        },
        py::arg("is_english"), py::arg("text_readable"), py::arg("is_cartoon"),
        py::arg("has_image"), py::arg("has_text"));

    m.def(
        "perceptual_hash",
        [](py::array_t<uint8_t, py::array::c_style | py::array::forcecast> image) {
            if (image.ndim() != 2)
                throw Error("image-invalid", "expected a 2-d grayscale array");
            Raster r;
            r.height = static_cast<int>(image.shape(0));
            r.width = static_cast<int>(image.shape(1));
            r.pixels.assign(image.data(), image.data() + image.size());
            return perceptual_hash(r);
        },
        py::arg("image"));
    m.def("hamming_distance", &hamming_distance);
    m.def(
        "dedup",
        [](const std::vector<std::tuple<std::string, int, int, uint64_t>>& images,
           int threshold) {
            std::vector<HashedImage> hashed;
            for (const auto& [id, w, h, hash] : images) hashed.push_back({id, w, h, hash});
            py::list out;
            for (const auto& g : dedup(hashed, threshold))
                out.append(py::make_tuple(g.kept_id, g.member_ids));
            return out;
        },
        py::arg("images"), py::arg("threshold") = 4);
    m.def(
        "split_dataset",
        [](const std::vector<MemeRecord>& records, double train, double validation,
           double test, uint64_t seed, const std::string& name) {
            return split_dataset(records, {train, validation, test}, seed, name);
        },
        py::arg("records"), py::arg("train"), py::arg("validation"), py::arg("test"),
        py::arg("seed") = 0, py::arg("name") = "");

    m.def(
        "consolidate",
        [](const std::string& meme_id,
           const std::vector<std::tuple<std::string, HarmLabel,
                                        std::optional<TargetLabel>>>& labels) {
            AnnotationSet s;
            s.meme_id = meme_id;
            for (const auto& [ann, harm, target] : labels) s.labels.push_back({ann, harm, target});
            auto r = consolidate(s);
            py::dict d;
            d["meme_id"] = r.meme_id;
            d["harm_decided"] = r.harm.decided;
            d["harm_label"] = r.harm.decided ? py::cast(r.harm.label) : py::none();
            d["harm_method"] = r.harm.method == ConsolidationMethod::unanimous ? "unanimous"
                               : r.harm.method == ConsolidationMethod::majority
                                   ? "majority"
                                   : "consolidator";
            if (r.target) {
                d["target_decided"] = r.target->decided;
                d["target_label"] =
                    r.target->decided ? py::cast(r.target->label) : py::none();
            } else {
                d["target_decided"] = py::none();
                d["target_label"] = py::none();
            }
            return d;
        },
        py::arg("meme_id"), py::arg("labels"));
    m.def(
        "cohen_kappa",
        [](const std::vector<int>& a, const std::vector<int>& b) {
            return cohen_kappa(a, b);
        },
        py::arg("a"), py::arg("b"));

    m.def("synthetic_rows", &synthetic_rows, py::arg("seed_material"), py::arg("rows"),
          py::arg("cols"));

    py::class_<EmbeddingBundle>(m, "EmbeddingBundle")
        .def(py::init<>())
        .def_readwrite("f_image", &EmbeddingBundle::f_image)
        .def_readwrite("f_text", &EmbeddingBundle::f_text)
        .def_readwrite("proposals", &EmbeddingBundle::proposals)
        .def_readwrite("attributes", &EmbeddingBundle::attributes)
        .def_readwrite("attribute_names", &EmbeddingBundle::attribute_names)
        .def_property_readonly("num_proposals", &EmbeddingBundle::num_proposals)
        .def_property_readonly("num_attributes", &EmbeddingBundle::num_attributes);

    m.def(
        "synthetic_encode",
        [](const MemeRecord& record, std::optional<int> proposals,
           std::optional<int> attributes) {
            SyntheticBackend backend({proposals, attributes});
            return encode_bundle(record, backend);
        },
        py::arg("record"), py::arg("proposals") = py::none(),
        py::arg("attributes") = py::none());

    py::class_<EmbeddingCache>(m, "EmbeddingCache")
        .def_static("open_rw", &EmbeddingCache::open_rw, py::arg("path"))
        .def_static("open_ro", &EmbeddingCache::open_ro, py::arg("path"))
        .def("contains", &EmbeddingCache::contains)
        .def("ids", &EmbeddingCache::ids)
        .def("put", &EmbeddingCache::put, py::arg("id"), py::arg("bundle"))
        .def("get", [](const EmbeddingCache& c, const std::string& id) -> py::object {
            auto b = c.get(id);
            return b ? py::cast(*b) : py::none().cast<py::object>();
        });

    py::class_<ModelParams>(m, "ModelParams")
        .def_property_readonly("c_harm",
                               [](const ModelParams& p) { return p.config.c_harm; })
        .def_property_readonly("variant",
                               [](const ModelParams& p) { return p.config.variant; })
        .def_property_readonly("seed", [](const ModelParams& p) { return p.seed; });

    m.def(
        "init_params",
        [](uint64_t seed, int c_harm, int hidden, Variant variant) {
            return init_params(seed, {c_harm, hidden, variant});
        },
        py::arg("seed"), py::arg("c_harm") = 3, py::arg("hidden") = 128,
        py::arg("variant") = Variant::full);
    m.def(
        "forward",
        [](const EmbeddingBundle& bundle, const ModelParams& params, Variant variant) {
            return trace_dict(forward(bundle, params, variant));
        },
        py::arg("bundle"), py::arg("params"), py::arg("variant") = Variant::full);
    m.def("save_checkpoint", &save_checkpoint, py::arg("params"), py::arg("path"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

    m.def(
        "focal_loss",
        [](const Eigen::VectorXd& probs, int true_class, const Eigen::VectorXd& alpha,
           double gamma) { return focal_loss(probs, true_class, alpha, gamma); },
        py::arg("probs"), py::arg("true_class"), py::arg("alpha"), py::arg("gamma"));

    m.def(
        "train",
        [](const DatasetManifest& manifest, const std::string& cache_path,
           const py::kwargs& kwargs) {
            TrainConfig config = config_from_kwargs(kwargs);
            EmbeddingCache cache = EmbeddingCache::open_ro(cache_path);
            TrainResult r = train(manifest, cache, config);
            py::list history;
            for (const auto& e : r.history) {
                py::dict h;
                h["epoch"] = e.epoch;
                h["train_loss"] = e.train_loss;
                h["val_accuracy"] =
                    e.val_accuracy ? py::cast(*e.val_accuracy) : py::none();
                history.append(std::move(h));
            }
            return py::make_tuple(r.params, history);
        },
        py::arg("manifest"), py::arg("cache"));

    m.def(
        "evaluate",
        [](const ModelParams& params, const DatasetManifest& manifest,
           const std::string& cache_path, const std::string& task,
           const std::string& split, int threads) {
            EmbeddingCache cache = EmbeddingCache::open_ro(cache_path);
            return report_dict(evaluate(params, manifest, cache, parse_task(task),
                                        parse_split(split), threads));
        },
        py::arg("params"), py::arg("manifest"), py::arg("cache"), py::arg("task"),
        py::arg("split") = "test", py::arg("threads") = 1);

    m.def(
        "majority_baseline",
        [](const DatasetManifest& train_m, const DatasetManifest& test_m,
           const std::string& task) {
            return report_dict(majority_baseline(train_m, test_m, parse_task(task)));
        },
        py::arg("train"), py::arg("test"), py::arg("task"));

    m.def(
        "accuracy",
        [](const std::vector<int>& y, const std::vector<int>& p) {
            return accuracy_pct(y, p);
        },
        py::arg("truth"), py::arg("predicted"));
    m.def(
        "macro_f1",
        [](const std::vector<int>& y, const std::vector<int>& p, int k) {
            return macro_f1_pct(y, p, k);
        },
        py::arg("truth"), py::arg("predicted"), py::arg("num_classes"));
    m.def(
        "mmae",
        [](const std::vector<int>& y, const std::vector<int>& p, int k) {
            return mmae(y, p, k);
        },
        py::arg("truth"), py::arg("predicted"), py::arg("num_classes"));

    m.def("make_demo_manifest", &make_demo_manifest, py::arg("name"),
          py::arg("num_records"), py::arg("seed"));
    m.def("run_demo", &run_demo, py::arg("out_dir"), py::arg("seed") = 0,
          py::arg("threads") = 1);

    m.attr("__version__") = "0.1.0";
}
