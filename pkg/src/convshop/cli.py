"""Command-line entry points for the whole pipeline."""

from __future__ import annotations

import json
import random
import sys

import click

from .catalog import Catalog, TfIdfIndex, generate_synthetic_catalog
from .evalkit import (
    catalog_stats,
    dataset_stats,
    format_stats,
    induce_templates,
    search_eval,
    sr_at_t,
    state_prf,
    track_dialogs,
)
from .resources import default_paraphraser, default_seeds, default_template_bank
from .selfplay import (
    assemble_dialog,
    derive_goal,
    generate_sessions,
    read_dialogs,
    read_sessions,
    self_play,
    write_dialogs,
    write_sessions,
)
from .state import ValueGazetteer
from .transfer import (
    KeywordLexicon,
    build_templates,
    load_seeds,
    read_templates,
    templates_by_intent,
    write_templates,
)


@click.group()
def main():
    """Conversational product-search workbench."""


@main.command("gen-catalog")
@click.option("--out", required=True, type=click.Path())
@click.option("--n", default=400, show_default=True)
@click.option("--vacancy", default=0.3, show_default=True)
@click.option("--seed", default=0, show_default=True)
def gen_catalog(out, n, vacancy, seed):
    """Generate a synthetic catalog (ndjson with a leading schema line)."""
    catalog = generate_synthetic_catalog(n, vacancy_ratio=vacancy, seed=seed)
    catalog.dump(out)
    click.echo(f"wrote {len(catalog)} products to {out} "
               f"(vacancy {catalog.vacancy_ratio():.4f})")


@main.command("gen-sessions")
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--n", default=1000, show_default=True)
@click.option("--min-keywords", default=1, show_default=True)
@click.option("--max-keywords", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
def gen_sessions(catalog_path, out, n, min_keywords, max_keywords, seed):
    """Sample search-behavior sessions (keywords + purchased product)."""
    catalog = Catalog.load(catalog_path)
    write_sessions(generate_sessions(catalog, n, seed=seed,
                                     min_keywords=min_keywords,
                                     max_keywords=max_keywords), out)
    click.echo(f"wrote {n} sessions to {out}")


@main.command("index")
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def index_cmd(catalog_path, out):
    """Build the tf-idf inverted index over product profiles."""
    catalog = Catalog.load(catalog_path)
    TfIdfIndex.build(catalog).dump(out)
    click.echo(f"indexed {len(catalog)} products to {out}")


@main.command("transfer-utterances")
@click.option("--seeds", "seeds_path", type=click.Path(exists=True),
              help="Seed ndjson; defaults to the built-in seed set.")
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True),
              help="TSV keyword lexicon; defaults to the built-in one.")
@click.option("--out", required=True, type=click.Path())
@click.option("--no-syntax-filter", is_flag=True, default=False)
def transfer_utterances(seeds_path, lexicon_path, out, no_syntax_filter):
    """Transfer seed utterances into shopping templates (stages 1-3)."""
    from .resources import DEFAULT_LEXICON

    seeds = load_seeds(seeds_path) if seeds_path else default_seeds()
    lexicon = KeywordLexicon.load(lexicon_path) if lexicon_path else DEFAULT_LEXICON
    templates = build_templates(seeds, lexicon, use_syntax_filter=not no_syntax_filter)
    write_templates(templates, out)
    click.echo(f"wrote {len(templates)} templates to {out}")


@main.command("gen-dialogs")
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--sessions", "sessions_path", required=True, type=click.Path(exists=True))
@click.option("--templates", "templates_path", type=click.Path(exists=True),
              help="Template ndjson; defaults to the built-in bank.")
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--no-paraphrase", is_flag=True, default=False)
@click.option("--push-threshold", default=5, show_default=True,
              help="Self-play agent pushes once candidates drop to this size; "
                   "small values lengthen dialogs toward the reference corpus shape.")
def gen_dialogs(catalog_path, sessions_path, templates_path, out, seed,
                no_paraphrase, push_threshold):
    """Realize self-play outlines into annotated dialogs."""
    from .selfplay import SelfPlayConfig

    catalog = Catalog.load(catalog_path)
    sessions = read_sessions(sessions_path)
    if templates_path:
        bank = templates_by_intent(read_templates(templates_path))
    else:
        bank = default_template_bank()
    paraphraser = None if no_paraphrase else default_paraphraser(seed=seed)
    config = SelfPlayConfig(push_threshold=push_threshold)
    rng = random.Random(seed)
    dialogs = []
    skipped = 0
    for i, session in enumerate(sessions):
        goal = derive_goal(session, catalog)
        if not goal.initial_state or not goal.target:
            skipped += 1
            continue
        outline = self_play(goal, catalog, config, rng=random.Random(rng.random()))
        dialogs.append(assemble_dialog(outline, bank, paraphraser,
                                       rng_seed=seed * 1_000_003 + i, catalog=catalog))
    write_dialogs(dialogs, out)
    click.echo(f"wrote {len(dialogs)} dialogs to {out} ({skipped} sessions skipped)")


@main.command("train")
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--dialogs", "dialogs_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--mode", default="hybrid", show_default=True,
              type=click.Choice(["hybrid", "text", "attr"]))
@click.option("--d", default=32, show_default=True)
@click.option("--epochs", default=10, show_default=True)
@click.option("--lr", default=1e-4, show_default=True)
@click.option("--batch-size", default=16, show_default=True)
@click.option("--candidates-k", default=50, show_default=True)
@click.option("--val-fraction", default=0.1, show_default=True)
@click.option("--max-per-dialog", default=None, type=int)
@click.option("--seed", default=0, show_default=True)
def train_cmd(catalog_path, dialogs_path, out, mode, d, epochs, lr, batch_size,
              candidates_k, val_fraction, max_per_dialog, seed):
    """Train the neural matcher on annotated dialogs."""
    from .model import (
        ModelConfig,
        ModelParams,
        TrainConfig,
        build_examples,
        build_vocabs,
        init_params,
        train,
    )

    catalog = Catalog.load(catalog_path)
    dialogs = read_dialogs(dialogs_path)
    index = TfIdfIndex.build(catalog)
    text_v, attr_v, state_v = build_vocabs(dialogs, catalog)
    examples = build_examples(dialogs, catalog, index, text_v, attr_v, state_v,
                              candidates_k=candidates_k, max_per_dialog=max_per_dialog)
    rng = random.Random(seed)
    rng.shuffle(examples)
    n_val = max(1, int(len(examples) * val_fraction))
    val, tr = examples[:n_val], examples[n_val:]
    cfg = ModelConfig(d=d, text_vocab=len(text_v), attr_vocab=len(attr_v),
                      state_vocab=len(state_v), mode=mode)
    params = init_params(cfg, seed=seed)
    hist = train(tr, val, params, cfg,
                 TrainConfig(lr=lr, batch_size=batch_size, max_epochs=epochs, seed=seed))
    bundle = ModelParams(params=params, cfg=cfg, text_vocab=text_v,
                         attr_vocab=attr_v, state_vocab=state_v,
                         history=[{"train": hist.train_loss, "val": hist.val_loss}])
    bundle.save(out)
    click.echo(f"trained on {len(tr)} examples ({len(val)} val); "
               f"final val loss {hist.val_loss[-1]:.4f}; saved to {out}")


@main.command("grad-check")
@click.option("--n-examples", default=10, show_default=True)
@click.option("--h", default=1e-5, show_default=True)
@click.option("--tol", default=1e-4, show_default=True)
@click.option("--seed", default=0, show_default=True)
def grad_check_cmd(n_examples, h, tol, seed):
    """Verify analytic gradients against central differences on random data."""
    from .testing import random_examples

    from .model import grad_check

    params, cfg, examples = random_examples(n_examples, seed=seed)
    worst = 0.0
    for i, ex in enumerate(examples):
        rel, _ = grad_check(params, ex, cfg, h=h, seed=seed + i)
        worst = max(worst, rel)
    click.echo(f"max relative error over {n_examples} examples: {worst:.3e}")
    if worst >= tol:
        raise SystemExit(1)


@main.command("eval")
@click.option("--metric", required=True,
              type=click.Choice(["sr", "state", "search", "stats"]))
@click.option("--dialogs", "dialogs_path", required=True, type=click.Path(exists=True))
@click.option("--catalog", "catalog_path", type=click.Path(exists=True))
@click.option("--t", default=5, show_default=True, help="SR@t horizon")
@click.option("--k", default=5, show_default=True, help="top-k for search metrics")
@click.option("--out", "report_path", type=click.Path(), help="JSON report file")
def eval_cmd(metric, dialogs_path, catalog_path, t, k, report_path):
    """Compute a metric over a dialog file."""
    dialogs = read_dialogs(dialogs_path)
    report: dict
    if metric == "stats":
        report = dataset_stats(dialogs)
        if catalog_path:
            report.update({f"catalog_{k_}": v for k_, v in
                           catalog_stats(Catalog.load(catalog_path)).items()})
        click.echo(format_stats(report, "Dataset statistics"))
    elif metric == "sr":
        report = {"sr_at_t": sr_at_t(dialogs, t), "t": t}
        click.echo(f"SR@{t} = {report['sr_at_t']:.4f}")
    elif metric == "state":
        if not catalog_path:
            raise click.UsageError("--catalog is required for --metric state")
        catalog = Catalog.load(catalog_path)
        gaz = ValueGazetteer(catalog.schema.to_dict())
        templates = induce_templates(dialogs)
        pred, gold = track_dialogs(dialogs, templates, gaz)
        report = state_prf(pred, gold)
        click.echo(json.dumps(report, indent=2))
    else:  # search
        if not catalog_path:
            raise click.UsageError("--catalog is required for --metric search")
        catalog = Catalog.load(catalog_path)
        index = TfIdfIndex.build(catalog)
        from .text import tokenize

        def rank_fn(user_text, state_str, history_text):
            return [pid for pid, _ in index.candidates(tokenize(user_text), 50)]

        report = search_eval(dialogs, rank_fn, k=k)
        click.echo(json.dumps(report, indent=2))
    if report_path:
        with open(report_path, "w") as fh:
            json.dump(report, fh, indent=2)


@main.command("chat")
@click.option("--catalog", "catalog_path", type=click.Path(exists=True))
@click.option("--backend", default="rule", show_default=True,
              type=click.Choice(["rule", "tfidf", "neural", "hybrid"]))
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True))
@click.option("--debug", is_flag=True, default=False)
@click.option("--transcript", "transcript_path", type=click.Path(),
              help="Write the finished session in the dialog record format.")
def chat(catalog_path, backend, checkpoint_path, debug, transcript_path):
    """Interactive session on the terminal."""
    from .runtime import Engine, EngineConfig

    if catalog_path:
        catalog = Catalog.load(catalog_path)
    else:
        catalog = generate_synthetic_catalog(400, vacancy_ratio=0.3, seed=0)
    model = None
    if checkpoint_path:
        from .model import ModelParams

        model = ModelParams.load(checkpoint_path)
    engine = Engine(catalog, model=model,
                    config=EngineConfig(backend=backend, debug=debug))
    session = engine.open_session()
    click.echo(session.turns[0]["text"])
    while session.status == "OPEN":
        try:
            text = click.prompt("you", prompt_suffix="> ")
        except (click.Abort, EOFError):
            break
        reply = engine.step_session(session, text)
        click.echo(reply["text"])
        if debug and reply.get("debug"):
            click.echo(json.dumps(reply["debug"], indent=2))
    click.echo(f"[session {session.status.lower()}]")
    if transcript_path:
        with open(transcript_path, "w") as fh:
            json.dump({"turns": session.turns, "status": session.status,
                       "purchased_id": session.purchased_id}, fh, indent=2)


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--catalog", "catalog_path", type=click.Path(exists=True))
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True))
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
@click.option("--backend", default=None,
              type=click.Choice(["rule", "tfidf", "neural", "hybrid"]))
@click.option("--debug", is_flag=True, default=False)
def serve_cmd(config_path, catalog_path, checkpoint_path, host, port, backend, debug):
    """Run the HTTP service."""
    from .service import ServiceConfig, serve

    config = ServiceConfig.load(config_path)
    if catalog_path:
        config.catalog_path = catalog_path
    if checkpoint_path:
        config.checkpoint_path = checkpoint_path
    if host:
        config.host = host
    if port:
        config.port = port
    if backend:
        config.backend = backend
    if debug:
        config.debug = True
    click.echo(f"serving on {config.host}:{config.port} (backend {config.backend})")
    serve(config)


if __name__ == "__main__":
    sys.exit(main())
