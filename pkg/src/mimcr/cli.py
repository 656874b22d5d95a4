"""Command-line entry point: ``python -m mimcr <command> ...``.

Commands: synth, pretrain, train, eval, demo, inspect.  Every failure
prints a single ``error: <kind>: <message>`` line on stderr and exits
nonzero.  Verbosity comes from the MIMCR_LOG environment variable
(error, info or debug).
"""
import argparse
import json
import logging
import os
import sys

import numpy as np

from .catalog import SynthSpec, load_catalog_dir, save_catalog, split_interactions, synth_catalog
from .config import TrainConfig
from .dialog_state import dump_transcript, finish, init_state, transcript_record
from .embed import EmbeddingStore, NodeSpace, build_triples, fallback_random_init, transe_train
from .evaluation import AbsGreedyAgent, MaxEntropyAgent, evaluate
from .model import MCMIPL, MCMIPLAgent
from .encoder import build_global_graph
from .numeric import CheckpointError
from .policy import Ask, StarvedActionSpace
from .dialog_state import update_after_question, update_after_recommendation
from .scenario import sample_episodes
from .trainer import Trainer, load_checkpoint, save_checkpoint, write_log

log = logging.getLogger("mimcr")

PRETRAIN_KEYS = {"d": 64, "epochs": 30, "margin": 1.0, "lr": 0.01, "neg_per_pos": 1, "batch_size": 256}


class CliError(Exception):
    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind


def _setup_logging():
    level = os.environ.get("MIMCR_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        raise CliError("config", f"MIMCR_LOG must be one of error, info, debug (got {level!r})")
    logging.basicConfig(level=levels[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _read_json(path, what):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise CliError("io", f"{what} file not found: {path}")
    except json.JSONDecodeError as e:
        raise CliError("config", f"{what} file {path} is not valid JSON: {e}")


def _ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise CliError("io", f"cannot create directory {path}: {e.strerror}")
    if not os.access(path, os.W_OK):
        raise CliError("io", f"directory {path} is not writable")


def _parent_dir(path):
    _ensure_dir(os.path.dirname(os.path.abspath(path)))


def _load_data(path):
    if not path:
        raise CliError("usage", "--data is required")
    if not os.path.isdir(path):
        raise CliError("io", f"data directory not found: {path}")
    return load_catalog_dir(path)


def load_train_config(path, overrides):
    d = _read_json(path, "config") if path else {}
    d.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return TrainConfig.from_dict(d)
    except (KeyError, TypeError, ValueError) as e:
        raise CliError("config", str(e).strip("'\""))


# ---------------------------------------------------------------- commands

def cmd_synth(args):
    if not args.spec:
        raise CliError("usage", "--spec is required")
    try:
        spec = SynthSpec.from_dict(_read_json(args.spec, "spec"))
    except (KeyError, TypeError, ValueError) as e:
        raise CliError("config", str(e).strip("'\""))
    catalog = synth_catalog(spec, seed=args.seed)
    _ensure_dir(args.out)
    save_catalog(catalog, args.out)
    log.info("wrote catalog with %d users, %d items, %d interactions to %s",
             catalog.num_users, catalog.num_items, len(catalog.interactions), args.out)


def pretrain_settings(path):
    raw = _read_json(path, "config") if path else {}
    train_fields = set(TrainConfig.__dataclass_fields__)
    unknown = sorted(k for k in raw if k not in PRETRAIN_KEYS and k not in train_fields)
    if unknown:
        raise CliError("config", f"unknown pretrain field {unknown[0]!r}")
    out = dict(PRETRAIN_KEYS)
    out.update({k: raw[k] for k in PRETRAIN_KEYS if k in raw})
    if "pretrain_epochs" in raw:
        out["epochs"] = raw["pretrain_epochs"]
    return out


def cmd_pretrain(args):
    catalog = _load_data(args.data)
    settings = pretrain_settings(args.config)
    split = split_interactions(catalog, seed=args.seed)
    triples = build_triples(catalog, split.train)
    store = transe_train(triples, d=int(settings["d"]), epochs=int(settings["epochs"]),
                         margin=float(settings["margin"]), lr=float(settings["lr"]),
                         neg_per_pos=int(settings["neg_per_pos"]), seed=args.seed,
                         batch_size=int(settings["batch_size"]))
    _parent_dir(args.out)
    store.save(args.out)
    with open(args.out + ".loss.csv", "w", encoding="utf-8") as f:
        f.write("epoch,loss\n")
        for i, x in enumerate(store.loss_history, 1):
            f.write(f"{i},{x:.6g}\n")
    log.info("saved %d-dim embeddings to %s", store.dim, args.out)


def _load_store(path, catalog, d, seed):
    space = NodeSpace.of(catalog)
    if not path:
        log.warning("no --embeddings given; falling back to seeded random initialisation")
        print("warning: no embeddings given, using random initialisation", file=sys.stderr)
        return fallback_random_init(space, d, seed)
    try:
        store = EmbeddingStore.load(path)
    except FileNotFoundError:
        raise CliError("io", f"embeddings checkpoint not found: {path}")
    except CheckpointError as e:
        raise CliError("checkpoint", str(e))
    if store.space != space:
        raise CliError("checkpoint", "embeddings were trained on a catalog of a different size")
    if store.dim != d:
        raise CliError("config", f"embeddings have dim {store.dim} but config d={d}")
    return store


def cmd_train(args):
    catalog = _load_data(args.data)
    overrides = {"seed": args.seed, "candidate_mode": args.candidate_mode, "episodes": args.episodes}
    if args.no_target_net:
        overrides["target_update_interval"] = 0
    cfg = load_train_config(args.config, overrides)
    store = _load_store(args.embeddings, catalog, cfg.d, cfg.seed)
    split = split_interactions(catalog, cfg.split_ratios, seed=cfg.seed)
    _ensure_dir(args.out)
    trainer = Trainer(catalog, split, store, cfg)

    def progress(row):
        if (row["episode"] + 1) % 100 == 0:
            recent = trainer.log[-100:]
            log.info("episode %d  SR(100) %.3f  reward(100) %.3f", row["episode"] + 1,
                     np.mean([r["success"] for r in recent]), np.mean([r["reward"] for r in recent]))

    params, rows = trainer.run(checkpoint_dir=args.out, progress=progress)
    save_checkpoint(params, os.path.join(args.out, "model.ckpt"))
    write_log(rows, os.path.join(args.out, "train_log.csv"))
    cfg.save(os.path.join(args.out, "config.json"))
    store.save(os.path.join(args.out, "embeddings.ckpt"))
    log.info("training finished; artifacts in %s", args.out)


def _model_context(model_path, catalog, config_path, overrides):
    """Model checkpoint plus the config and embeddings saved next to it."""
    here = os.path.dirname(os.path.abspath(model_path))
    cfg_path = config_path or os.path.join(here, "config.json")
    cfg = load_train_config(cfg_path if os.path.exists(cfg_path) else None, overrides)
    emb_path = os.path.join(here, "embeddings.ckpt")
    store = _load_store(emb_path if os.path.exists(emb_path) else None, catalog, cfg.d, cfg.seed)
    try:
        params = load_checkpoint(model_path)
    except FileNotFoundError:
        raise CliError("io", f"model checkpoint not found: {model_path}")
    except CheckpointError as e:
        raise CliError("checkpoint", str(e))
    split = split_interactions(catalog, cfg.split_ratios, seed=cfg.seed)
    model = MCMIPL(catalog, store, build_global_graph(catalog, split.train), cfg)
    return cfg, model, params, split


def cmd_eval(args):
    catalog = _load_data(args.data)
    if bool(args.model) == bool(args.baseline):
        raise CliError("usage", "give exactly one of --model or --baseline")
    overrides = {"candidate_mode": args.candidate_mode}
    if args.model:
        cfg, model, params, split = _model_context(args.model, catalog, args.config, overrides)
        agent = MCMIPLAgent(model, params)
    else:
        cfg = load_train_config(args.config, overrides)
        split = split_interactions(catalog, cfg.split_ratios, seed=cfg.seed)
        store = _load_store(args.embeddings, catalog, cfg.d, cfg.seed)
        agent = AbsGreedyAgent(store, cfg) if args.baseline == "abs-greedy" else MaxEntropyAgent(catalog, store, cfg)
    pairs = split.test or split.train
    episodes = sample_episodes(catalog, pairs, args.episodes, cfg.n_v, seed=args.seed, max_turns=cfg.max_turns)
    report = evaluate(agent, episodes, catalog, cfg, seed=args.seed, jobs=args.jobs)
    text = report.to_json()
    if args.out:
        _parent_dir(args.out)
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    else:
        print(text)


def cmd_inspect(args):
    if args.model:
        try:
            params = load_checkpoint(args.model)
        except FileNotFoundError:
            raise CliError("io", f"checkpoint not found: {args.model}")
        except CheckpointError as e:
            raise CliError("checkpoint", str(e))
        for name in params.names():
            a = params[name].data
            print(f"{name}\t{tuple(a.shape)}\tnorm={np.linalg.norm(a):.4g}")
        print(f"adam steps\t{params.t}")
        return
    catalog = _load_data(args.data)
    sizes = [len(s) for s in catalog.item_attrs]
    per_attr = [len(catalog.items_with_attr[p]) for p in range(catalog.num_attr_instances)]
    print(f"users\t{catalog.num_users}")
    print(f"items\t{catalog.num_items}")
    print(f"attribute instances\t{catalog.num_attr_instances}")
    print(f"attribute types\t{catalog.num_attr_types}")
    print(f"interactions\t{len(catalog.interactions)}")
    print(f"instances per item\tmean {np.mean(sizes):.2f}, max {max(sizes)}")
    print(f"items per instance\tmean {np.mean(per_attr):.2f}, max {max(per_attr)}")


# ---------------------------------------------------------------- demo

def _ask_line(prompt, stdin, stdout):
    stdout.write(prompt)
    stdout.flush()
    line = stdin.readline()
    if line == "":
        raise EOFError
    return line.strip()


def parse_choice(text, n):
    """Comma-separated 1-based indices into a list of length n; '' means none."""
    if text == "":
        return []
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok.isdigit() or not 1 <= int(tok) <= n:
            raise ValueError(f"expected numbers between 1 and {n}")
        if int(tok) - 1 not in out:
            out.append(int(tok) - 1)
    return out


def run_demo(agent, catalog, cfg, user, seed_instance, stdin, stdout):
    """Human-as-user session.  Returns (transcript records, success)."""
    state = init_state(user, seed_instance, catalog)
    records = []
    stdout.write(f"You are user {user}. You are looking for an item with attribute instance {seed_instance}.\n")
    while not state.terminal:
        try:
            action = agent.act(state)
        except StarvedActionSpace:
            stdout.write("The agent has nothing left to ask or recommend.\n")
            state = finish(state)
            break
        if isinstance(action, Ask):
            stdout.write(f"\nTurn {state.turn + 1}: which of these instances (type {action.attr_type}) do you like?\n")
            for i, p in enumerate(action.instances, 1):
                stdout.write(f"  {i}. instance {p}\n")
            stdout.write("  (enter numbers separated by commas, empty line for Others)\n")
            while True:
                try:
                    picked = parse_choice(_ask_line("> ", stdin, stdout), len(action.instances))
                    break
                except ValueError as e:
                    stdout.write(f"Sorry, {e}.\n")
            acc = frozenset(action.instances[i] for i in picked)
            rej = frozenset(action.instances) - acc
            nxt = update_after_question(state, acc, rej, catalog, cfg.candidate_mode, cfg.prune_attrs)
            records.append(transcript_record(nxt.turn, "ask", action.instances, acc, rej, nxt, 0.0,
                                             attr_type=action.attr_type))
        else:
            stdout.write(f"\nTurn {state.turn + 1}: how about one of these items?\n")
            for i, v in enumerate(action.items, 1):
                attrs = ",".join(str(p) for p in sorted(catalog.item_attrs[v]))
                stdout.write(f"  {i}. item {v} (instances {attrs})\n")
            while True:
                text = _ask_line("accept which number, or 'no'? ", stdin, stdout).lower()
                if text in ("no", "n"):
                    rank = 0
                    break
                if text.isdigit() and 1 <= int(text) <= len(action.items):
                    rank = int(text)
                    break
                stdout.write(f"Sorry, enter a number between 1 and {len(action.items)} or 'no'.\n")
            nxt = update_after_recommendation(state, action.items, rank > 0, catalog, cfg.prune_attrs)
            records.append(transcript_record(nxt.turn, "recommend", action.items, [], [], nxt, 0.0,
                                             success=rank > 0, rank=rank))
        if not nxt.terminal and nxt.turn >= cfg.max_turns:
            nxt = finish(nxt)
        state = nxt
    stdout.write("\nGreat, glad you found something.\n" if state.success else "\nSession over without a match.\n")
    return records, state.success


def cmd_demo(args):
    catalog = _load_data(args.data)
    if not args.model:
        raise CliError("usage", "--model is required")
    cfg, model, params, split = _model_context(args.model, catalog, args.config,
                                               {"candidate_mode": args.candidate_mode})
    rng = np.random.default_rng(args.seed)
    user = args.user if args.user is not None else int(rng.integers(catalog.num_users))
    if args.seed_instance is not None:
        p0 = args.seed_instance
    else:
        populated = [p for p in range(catalog.num_attr_instances) if catalog.items_with_attr[p]]
        p0 = populated[int(rng.integers(len(populated)))]
    if not 0 <= user < catalog.num_users:
        raise CliError("usage", f"user {user} out of range")
    if not 0 <= p0 < catalog.num_attr_instances or not catalog.items_with_attr[p0]:
        raise CliError("usage", f"seed instance {p0} is not usable")
    records = []
    try:
        records, _ = run_demo(MCMIPLAgent(model, params), catalog, cfg, user, p0, sys.stdin, sys.stdout)
    except (EOFError, KeyboardInterrupt):
        sys.stdout.write("\nSession aborted.\n")
    finally:
        path = args.transcript or "transcript.jsonl"
        dump_transcript(records, path)
        sys.stdout.write(f"Transcript written to {path}\n")


# ---------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="mimcr", description="Multi-interest conversational recommendation")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic catalog")
    s.add_argument("--spec")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("pretrain", help="TransE node embeddings")
    s.add_argument("--data")
    s.add_argument("--config")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_pretrain)

    s = sub.add_parser("train", help="online policy training")
    s.add_argument("--data")
    s.add_argument("--embeddings")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--episodes", type=int)
    s.add_argument("--candidate-mode", choices=["union", "intersection"])
    s.add_argument("--no-target-net", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a model or a baseline")
    s.add_argument("--data")
    s.add_argument("--model")
    s.add_argument("--baseline", choices=["abs-greedy", "max-entropy"])
    s.add_argument("--embeddings")
    s.add_argument("--config")
    s.add_argument("--episodes", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--candidate-mode", choices=["union", "intersection"])
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("demo", help="play the user against a trained agent")
    s.add_argument("--data")
    s.add_argument("--model")
    s.add_argument("--config")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--user", type=int)
    s.add_argument("--seed-instance", type=int)
    s.add_argument("--candidate-mode", choices=["union", "intersection"])
    s.add_argument("--transcript")
    s.set_defaults(func=cmd_demo)

    s = sub.add_parser("inspect", help="summarise a catalog or a checkpoint")
    s.add_argument("--data")
    s.add_argument("--model")
    s.set_defaults(func=cmd_inspect)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0) if e.code in (0, None) else 2
    try:
        _setup_logging()
        args.func(args)
    except CliError as e:
        print(f"error: {e.kind}: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, CheckpointError) as e:
        kind = "io" if isinstance(e, OSError) else "checkpoint" if isinstance(e, CheckpointError) else "data"
        msg = " ".join(str(e).split()) or type(e).__name__
        print(f"error: {kind}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
