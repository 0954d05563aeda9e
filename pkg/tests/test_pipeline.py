import json
import math
from pathlib import Path

import numpy as np
import pytest

from genuq import info_scores
from genuq.calibrate import load_scaler
from genuq.cli import main
from genuq.density import MahalanobisScorer, huq
from genuq.errors import ConfigError
from genuq.pipeline import (
    RunConfig,
    load_scores,
    render_table,
    run_calibrate,
    run_evaluate,
    run_score,
    run_synth,
)
from genuq.records import stream_dataset
from genuq.registry import catalog, method_ids
from genuq.synth import SynthSpec, generate_dataset, generate_records

# Every estimator named by the benchmark catalog must be invocable by id.
EXPECTED_IDS = {
    "msp",
    "perplexity",
    "mean_token_entropy",
    "max_token_entropy",
    "pmi",
    "conditional_pmi",
    "renyi_divergence",
    "fisher_rao",
    "token_sar",
    "ccp",
    "mc_sequence_entropy",
    "mc_norm_sequence_entropy",
    "semantic_entropy",
    "sentence_sar",
    "sar",
    "mahalanobis_distance",
    "rde",
    "rmd",
    "huq_md",
    "ptrue",
    "verbalized",
    "num_semantic_sets",
    "eigval_laplacian_nli_entail",
    "eigval_laplacian_nli_contra",
    "eigval_laplacian_jaccard",
    "degmat_nli_entail",
    "degmat_nli_contra",
    "degmat_jaccard",
    "eccentricity_nli_entail",
    "eccentricity_nli_contra",
    "eccentricity_jaccard",
    "lexical_similarity_rouge_l",
    "lexical_similarity_bleu",
    "label_prob",
    "bb_semantic_entropy",
    "bb_ptrue",
    "claim_msp",
    "claim_perplexity",
    "claim_mean_token_entropy",
    "claim_max_token_entropy",
    "claim_pmi",
    "claim_ptrue",
    "claim_ccp",
}


class TestRegistry:
    def test_catalog_covers_every_expected_method(self):
        assert set(method_ids()) == EXPECTED_IDS

    def test_levels(self):
        specs = catalog()
        for mid in EXPECTED_IDS:
            expected = "claim" if mid.startswith("claim_") else "sequence"
            assert specs[mid].level == expected


@pytest.fixture
def workspace(tmp_path):
    test_path = tmp_path / "test.jsonl"
    train_path = tmp_path / "train.jsonl"
    generate_dataset(SynthSpec(n_records=40, noise=0.05, seed=11), test_path)
    generate_dataset(SynthSpec(n_records=60, noise=0.05, seed=12), train_path)
    config = RunConfig(
        dataset=str(test_path),
        train=str(train_path),
        background=str(train_path),
        output_dir=str(tmp_path),
        quality_metric="alignscore",
        seed=11,
    )
    return config, tmp_path


class TestSynth:
    def test_deterministic_bytes(self, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        generate_dataset(SynthSpec(n_records=30, noise=0.1, seed=9), a)
        generate_dataset(SynthSpec(n_records=30, noise=0.1, seed=9), b)
        assert a.read_bytes() == b.read_bytes()

    def test_empty(self, tmp_path):
        path = tmp_path / "none.jsonl"
        generate_dataset(SynthSpec(n_records=0), path)
        assert path.read_text() == ""
        assert list(stream_dataset(path)) == []

    def test_every_field_exercised(self):
        records = generate_records(SynthSpec(n_records=10, seed=2))
        assert all(r.samples for r in records)
        assert all(r.embedding is not None for r in records)
        assert all(r.claims for r in records)
        assert all(r.ptrue_logprob is not None for r in records)
        assert all(r.verbalized_confidence is not None for r in records)
        assert all("alignscore" in r.quality and "accuracy" in r.quality for r in records)
        assert all(s.uncond_logprob is not None for r in records for s in r.output)


class TestRunScore:
    def test_empty_method_list_gives_empty_file(self, workspace, tmp_path):
        config, _ = workspace
        config.methods = []
        path = run_score(config, tmp_path / "empty.jsonl")
        assert path.read_text() == ""
        config.methods = ["msp"]
        rows = load_scores(run_score(config, tmp_path / "one.jsonl"))
        assert {r["method"] for r in rows} == {"msp"}

    def test_scores_match_direct_library_calls(self, workspace, tmp_path):
        config, _ = workspace
        config.methods = ["msp", "perplexity"]
        path = run_score(config, tmp_path / "s.jsonl")
        rows = load_scores(path)
        by_key = {(r["record_id"], r["method"]): r["value"] for r in rows}
        for record in stream_dataset(config.dataset):
            assert by_key[(record.id, "msp")] == info_scores.msp(record)
            assert by_key[(record.id, "perplexity")] == info_scores.perplexity(record)

    def test_method_needing_samples_emits_skip(self, workspace, tmp_path):
        config, tmp = workspace
        # strip samples from one record
        lines = Path(config.dataset).read_text().splitlines()
        obj = json.loads(lines[0])
        obj["samples"] = []
        lines[0] = json.dumps(obj)
        stripped = tmp / "stripped.jsonl"
        stripped.write_text("\n".join(lines) + "\n")
        config.dataset = str(stripped)
        config.methods = ["mc_sequence_entropy"]
        rows = load_scores(run_score(config, tmp / "skip.jsonl"))
        skipped = [r for r in rows if "skipped" in r]
        assert len(skipped) == 1
        assert "MissingSampleLogprobs" in skipped[0]["skipped"]
        assert len([r for r in rows if "value" in r]) == len(lines) - 1

    def test_unknown_method_rejected(self, workspace):
        config, _ = workspace
        config.methods = ["not_a_method"]
        with pytest.raises(ConfigError):
            run_score(config)

    def test_huq_combines_ingredient_ranks(self, workspace, tmp_path):
        config, _ = workspace
        config.methods = ["huq_md"]
        rows = load_scores(run_score(config, tmp_path / "huq.jsonl"))
        values = {r["record_id"]: r["value"] for r in rows if "value" in r}
        assert len(values) == 40
        # reproduce via direct calls
        train_embeddings = [
            r.embedding for r in stream_dataset(config.train) if r.embedding is not None
        ]
        fit = MahalanobisScorer().fit(train_embeddings)
        ids, info_col, dens_col = [], [], []
        for record in stream_dataset(config.dataset):
            ids.append(record.id)
            info_col.append(info_scores.msp(record))
            dens_col.append(fit.score_one(record.embedding))
        expected = dict(zip(ids, huq(info_col, dens_col, alpha=0.5)))
        assert values == expected

    def test_precomputed_matrices_take_priority(self, workspace, tmp_path):
        from genuq.diversity import degree_matrix_score
        from genuq.similarity import SimilarityMatrix

        config, tmp = workspace
        record_ids = [r.id for r in stream_dataset(config.dataset)]
        # a planted matrix distinct from anything the samples would produce
        planted = np.full((3, 3), 0.25)
        np.fill_diagonal(planted, 1.0)
        sims = tmp / "sims.jsonl"
        sims.write_text(
            "\n".join(
                json.dumps(
                    {
                        "record_id": rid,
                        "kind": "jaccard",
                        "entries": planted.flatten().tolist(),
                    }
                )
                for rid in record_ids
            )
            + "\n"
        )
        config.similarity_file = str(sims)
        config.methods = ["degmat_jaccard"]
        rows = load_scores(run_score(config, tmp_path / "pre.jsonl"))
        expected = degree_matrix_score(SimilarityMatrix(k=3, entries=planted))
        assert all(r["value"] == expected for r in rows)

    def test_all_methods_score_every_record(self, workspace, tmp_path):
        config, _ = workspace
        path = run_score(config, tmp_path / "all.jsonl")
        rows = load_scores(path)
        n_records = 40
        seq_methods = [m for m in method_ids() if not m.startswith("claim_")]
        for mid in seq_methods:
            mine = [r for r in rows if r["method"] == mid]
            assert len(mine) == n_records, mid
            assert all("value" in r for r in mine), mid
        claim_methods = [m for m in method_ids() if m.startswith("claim_")]
        n_claims = sum(len(r.claims) for r in stream_dataset(config.dataset))
        for mid in claim_methods:
            mine = [r for r in rows if r["method"] == mid]
            assert len(mine) == n_claims, mid


class TestCalibrateAndEvaluate:
    def test_calibrate_persists_models_and_is_deterministic(self, workspace, tmp_path):
        config, tmp = workspace
        config.methods = ["msp", "perplexity"]
        config.normalizers = ["all"]
        train_scores = run_score(
            RunConfig(**{**config.__dict__, "dataset": config.train}),
            tmp / "train_scores.jsonl",
        )
        models = run_calibrate(config, train_scores, tmp / "models")
        files = sorted(p.name for p in Path(models).glob("*.json"))
        assert files == [
            "msp.binned_pcc.json",
            "msp.isotonic_pcc.json",
            "msp.linear.json",
            "msp.quantile.json",
            "perplexity.binned_pcc.json",
            "perplexity.isotonic_pcc.json",
            "perplexity.linear.json",
            "perplexity.quantile.json",
        ]
        before = {p.name: p.read_bytes() for p in Path(models).glob("*.json")}
        run_calibrate(config, train_scores, tmp / "models")
        after = {p.name: p.read_bytes() for p in Path(models).glob("*.json")}
        assert before == after
        scaler = load_scaler(Path(models) / "msp.linear.json")
        assert scaler.kind == "linear"

    def test_missing_quality_metric_fails(self, workspace, tmp_path):
        config, tmp = workspace
        config.methods = ["msp"]
        config.quality_metric = "nonexistent"
        scores = run_score(config, tmp / "scores.jsonl")
        with pytest.raises(ConfigError):
            run_calibrate(config, scores, tmp / "m")

    def test_report_reproduces_direct_metric_calls(self, workspace, tmp_path):
        from genuq.metrics import prr as prr_fn, roc_auc as roc_fn

        config, tmp = workspace
        config.methods = ["msp", "claim_ptrue"]
        scores = run_score(config, tmp / "scores.jsonl")
        report_path = run_evaluate(config, scores)
        report = json.loads(Path(report_path).read_text())
        entry = report["methods"]["msp"]

        ids, u, q = [], [], []
        quality = {}
        labels = {}
        for record in stream_dataset(config.dataset):
            quality[record.id] = record.quality["alignscore"]
            for claim in record.claims:
                labels[(record.id, claim.claim_id)] = claim.label
        rows = load_scores(scores)
        for row in sorted(
            (r for r in rows if r["method"] == "msp"), key=lambda r: r["record_id"]
        ):
            u.append(row["value"])
            q.append(quality[row["record_id"]])
        expected = prr_fn(u, q, 0.5)
        assert entry["prr"] == expected.prr
        assert entry["auc_oracle"] == expected.auc_oracle

        claim_rows = sorted(
            (r for r in rows if r["method"] == "claim_ptrue"),
            key=lambda r: (r["record_id"], r["claim_id"]),
        )
        s = [r["value"] for r in claim_rows]
        y = [1 if labels[(r["record_id"], r["claim_id"])] == "unsupported" else 0 for r in claim_rows]
        assert report["methods"]["claim_ptrue"]["roc_auc"] == roc_fn(s, y)

    def test_oracle_dataset_gives_prr_one_for_planted_method(self, tmp_path):
        dataset = tmp_path / "oracle.jsonl"
        generate_dataset(SynthSpec(n_records=100, noise=0.0, correlation=1.0, seed=3), dataset)
        config = RunConfig(
            dataset=str(dataset), output_dir=str(tmp_path), methods=["msp"]
        )
        scores = run_score(config, tmp_path / "s.jsonl")
        report = json.loads(Path(run_evaluate(config, scores)).read_text())
        assert report["methods"]["msp"]["prr"] == 1.0

    def test_degenerate_quality_flagged_not_fatal(self, workspace, tmp_path):
        config, tmp = workspace
        config.methods = ["msp"]
        config.quality_metric = "accuracy"
        # make every label identical so oracle == random
        lines = []
        for line in Path(config.dataset).read_text().splitlines():
            obj = json.loads(line)
            obj["quality"]["accuracy"] = 1.0
            lines.append(json.dumps(obj))
        flat = tmp / "flat.jsonl"
        flat.write_text("\n".join(lines) + "\n")
        config.dataset = str(flat)
        scores = run_score(config, tmp / "s2.jsonl")
        report = json.loads(Path(run_evaluate(config, scores)).read_text())
        assert "DegenerateQuality" in report["methods"]["msp"]["error"]

    def test_unknown_claims_excluded_from_auc(self, workspace, tmp_path):
        config, tmp = workspace
        lines = []
        flipped = 0
        for line in Path(config.dataset).read_text().splitlines():
            obj = json.loads(line)
            for claim in obj["claims"]:
                if flipped < 5:
                    claim["label"] = "unknown"
                    flipped += 1
            lines.append(json.dumps(obj))
        ds = tmp / "unknowns.jsonl"
        ds.write_text("\n".join(lines) + "\n")
        config.dataset = str(ds)
        config.methods = ["claim_ptrue"]
        scores = run_score(config, tmp / "s4.jsonl")
        n_rows = len(load_scores(scores))
        report = json.loads(Path(run_evaluate(config, scores)).read_text())
        entry = report["methods"]["claim_ptrue"]
        assert entry["n_scored"] == n_rows - 5
        assert "roc_auc" in entry

    def test_all_supported_claims_flag_single_class(self, workspace, tmp_path):
        config, tmp = workspace
        lines = []
        for line in Path(config.dataset).read_text().splitlines():
            obj = json.loads(line)
            for claim in obj["claims"]:
                claim["label"] = "supported"
            lines.append(json.dumps(obj))
        ds = tmp / "onesided.jsonl"
        ds.write_text("\n".join(lines) + "\n")
        config.dataset = str(ds)
        config.methods = ["claim_msp"]
        scores = run_score(config, tmp / "s3.jsonl")
        report = json.loads(Path(run_evaluate(config, scores)).read_text())
        assert "SingleClass" in report["methods"]["claim_msp"]["error"]


class TestConfigFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text(
            "# comment\n"
            "dataset=data.jsonl\n"
            "methods=msp, perplexity\n"
            "max_rejection=0.4\n"
            "bins=12\n"
            "normalizers=linear,isotonic_pcc\n"
        )
        config = RunConfig.from_file(path)
        assert config.dataset == "data.jsonl"
        assert config.methods == ["msp", "perplexity"]
        assert config.max_rejection == 0.4
        assert config.bins == 12
        assert config.normalizers == ["linear", "isotonic_pcc"]

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.conf"
        path.write_text("no_such_key=1\n")
        with pytest.raises(ConfigError):
            RunConfig.from_file(path)

    def test_env_var_overrides_endpoint(self, monkeypatch):
        from genuq.nli import HttpNliClient, StubNli
        from genuq.pipeline import ENDPOINT_ENV_VAR

        config = RunConfig()
        assert isinstance(config.nli_provider(), StubNli)
        monkeypatch.setenv(ENDPOINT_ENV_VAR, "http://localhost:9")
        provider = config.nli_provider()
        assert isinstance(provider, HttpNliClient)
        assert provider.endpoint == "http://localhost:9"


class TestCli:
    def test_full_cli_flow(self, tmp_path, capsys):
        data = tmp_path / "d.jsonl"
        assert main(["synth", "--n", "30", "--seed", "5", "--noise", "0.1", "--out", str(data)]) == 0
        scores = tmp_path / "scores.jsonl"
        assert (
            main(
                [
                    "score",
                    "--dataset", str(data),
                    "--train", str(data),
                    "--methods", "msp,claim_ptrue,mahalanobis_distance",
                    "--output-dir", str(tmp_path),
                    "--out", str(scores),
                ]
            )
            == 0
        )
        models = tmp_path / "models"
        assert (
            main(
                [
                    "calibrate",
                    "--dataset", str(data),
                    "--train", str(data),
                    "--scores", str(scores),
                    "--normalizers", "all",
                    "--models-dir", str(models),
                    "--output-dir", str(tmp_path),
                ]
            )
            == 0
        )
        report = tmp_path / "report.json"
        assert (
            main(
                [
                    "evaluate",
                    "--dataset", str(data),
                    "--scores", str(scores),
                    "--models-dir", str(models),
                    "--output-dir", str(tmp_path),
                    "--out", str(report),
                ]
            )
            == 0
        )
        assert report.exists()
        payload = json.loads(report.read_text())
        assert "msp" in payload["methods"]
        assert "calibration_mse_isotonic_pcc" in payload["methods"]["msp"]
        assert main(["report", str(report)]) == 0
        out = capsys.readouterr().out
        assert "msp" in out

    def test_methods_subcommand_lists_catalog(self, capsys):
        assert main(["methods"]) == 0
        out = capsys.readouterr().out.split()
        assert set(out) == EXPECTED_IDS

    def test_missing_dataset_is_clean_error(self, tmp_path):
        assert main(["score", "--dataset", str(tmp_path / "nope.jsonl")]) == 1

    def test_render_table_alignment(self):
        table = render_table(
            {"methods": {"msp": {"level": "sequence", "n_scored": 3, "prr": 0.5}}}
        )
        lines = table.splitlines()
        assert lines[0].startswith("method")
        assert "msp" in lines[2]
