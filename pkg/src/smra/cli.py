"""``smra`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 decode failure.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from pathlib import Path

from . import binning, codec
from .entropy_bounds import gaussian_region, rate_storage_full_memory, rate_storage_single_memory
from .errors import IntegrityError, SmraError, StorageInsufficient
from .experiments import ExperimentConfig, Table, builtin_config, run_table_experiment
from .model import ChannelSpec, CorrelationModel
from .navigation import NavigationGraph, one_hop, previous_request_subsets, validate
from .sources import SourceEnsemble, dump_raw, generate, load_raw

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DECODE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(text, output=None):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True)


def _side_args(pairs):
    out = {}
    for item in pairs or ():
        j, sep, path = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected J=PATH, got {item!r}")
        out[int(j)] = path
    return out


# subcommands -----------------------------------------------------------------------

def cmd_bounds(a):
    g, m = NavigationGraph.load(a.graph), CorrelationModel.load(a.model)
    bound = (rate_storage_full_memory(a.source, g, m) if a.full_memory
             else rate_storage_single_memory(a.source, g, m))
    _emit(_json(bound.to_json()), a.output)


def cmd_graph(a):
    g = NavigationGraph.load(a.graph)
    issues = validate(g)
    out = {"num_sources": g.num_sources, "valid": not issues,
           "violations": [f"{type(v).__name__}{tuple(vars(v).values())}" for v in issues]}
    if a.source is not None:
        out["previous_requests"] = sorted(one_hop(g, a.source))
        out["subsets"] = sorted(sorted(s) for s in previous_request_subsets(g, a.source))
    _emit(_json(out), a.output)
    return EXIT_DATA if issues else EXIT_OK


def cmd_synth(a):
    g, m = NavigationGraph.load(a.graph), CorrelationModel.load(a.model)
    chans = {j: m.channel(a.source, j) for j in one_hop(g, a.source)}
    ens = generate(a.seed, a.n, chans)
    out = Path(a.outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{a.source}.raw").write_bytes(dump_raw(ens.x_k))
    for j, y in ens.side_infos.items():
        (out / f"{a.source}-from-{j}.raw").write_bytes(dump_raw(y))


def cmd_encode(a):
    g = NavigationGraph.load(a.graph)
    m = CorrelationModel.load(a.model) if a.model else None
    if m is None and not a.universal:
        raise argparse.ArgumentTypeError("--model is required unless --universal is given")
    x = load_raw(Path(a.input).read_bytes())
    sides = {j: load_raw(Path(p).read_bytes()) for j, p in _side_args(a.side).items()}
    bs, rep = codec.offline_encode(SourceEnsemble(x.shape[0], x, sides), g, m, a.source,
                                   universal=a.universal, type_table=a.type_table)
    Path(a.output).write_bytes(codec.serialize(bs))
    text = _json(rep.to_json())
    if a.report:
        Path(a.report).write_text(text + "\n")
    else:
        _emit(text)


def cmd_extract(a):
    bs = codec.deserialize(Path(a.stream).read_bytes())
    tx = codec.online_extract(bs, a.prev)
    Path(a.output).write_bytes(codec.serialize_transmission(tx))
    _emit(_json({"level": tx.level, "bits": int(tx.bits.shape[0]), "total_bits": tx.total_bits()}))


def cmd_decode(a):
    tx = codec.deserialize_transmission(Path(a.transmission).read_bytes())
    y = load_raw(Path(a.side).read_bytes()) if a.side else None
    ch = ChannelSpec.parse(a.channel) if a.channel else None
    Path(a.output).write_bytes(dump_raw(codec.decode(tx, y, ch)))


def cmd_experiment(a):
    if a.table == Table.CUSTOM.value:
        if not a.n or not a.channels:
            raise argparse.ArgumentTypeError("custom tables need --n and --channels")
        cfg = ExperimentConfig(Table.CUSTOM, a.n, tuple(ChannelSpec.parse(c) for c in a.channels),
                               tuple(range(a.seeds)))
    else:
        cfg = builtin_config(a.table, seeds=range(a.seeds))
    res = run_table_experiment(cfg)
    text = {"csv": res.csv, "json": res.json, "table": res.console}[a.format]()
    _emit(text, a.output)


def cmd_oracle(a):
    ch = ChannelSpec.parse(a.channel)
    ests = []
    for spec in a.rates:
        stages = [float(r) for r in spec.split(",")]
        ests.append(binning.monte_carlo_error(a.n, stages, ch, a.eps, a.trials, a.seed,
                                              closed=a.closed))
    buf = io.StringIO()
    binning.write_csv(ests, buf)
    _emit(buf.getvalue(), a.output)


def cmd_gaussian(a):
    g, m = NavigationGraph.load(a.graph), CorrelationModel.load(a.model)
    pts, storage = gaussian_region(a.source, g, m, a.delta, a.sigma)
    out = {"delta": a.delta, "storage_rate": storage,
           "points": {str(j): {"distortion": p.distortion, "rate": p.rate} for j, p in pts.items()}}
    _emit(_json(out), a.output)


def cmd_serve(a):
    from .service import Store, make_server

    g = NavigationGraph.load(a.graph) if a.graph else None
    m = CorrelationModel.load(a.model) if a.model else None
    store = Store(a.data_dir, g, m, a.n, universal=a.universal)
    server = make_server(store, a.host, a.port)
    print(f"serving on http://{server.server_address[0]}:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


# parser ----------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="smra", description="Rate-storage bounds and prefix-nested source coding.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        return sp

    sp = add("bounds", cmd_bounds, "rate and storage bounds of one source (JSON)")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--source", type=int, required=True)
    sp.add_argument("--full-memory", action="store_true", help="decoder keeps every earlier request")
    sp.add_argument("--output")

    sp = add("graph", cmd_graph, "validate a navigation graph")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--source", type=int)
    sp.add_argument("--output")

    sp = add("synth", cmd_synth, "draw a source and its side informations")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--source", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--outdir", required=True)

    sp = add("encode", cmd_encode, "encode a source into a stored stream")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--model")
    sp.add_argument("--source", type=int, required=True)
    sp.add_argument("--input", required=True, help="raw file of the source")
    sp.add_argument("--side", action="append", metavar="J=PATH",
                    help="raw realization of previous request J (repeatable)")
    sp.add_argument("--universal", action="store_true")
    sp.add_argument("--type-table", action="store_true", help="full joint counts as learning strings")
    sp.add_argument("--output", required=True)
    sp.add_argument("--report")

    sp = add("extract", cmd_extract, "slice a stored stream for one previous request")
    sp.add_argument("--stream", required=True)
    sp.add_argument("--prev", type=int, required=True)
    sp.add_argument("--output", required=True)

    sp = add("decode", cmd_decode, "decode a transmission with side information")
    sp.add_argument("--transmission", required=True)
    sp.add_argument("--side", help="raw realization of the previous request")
    sp.add_argument("--channel", help="override the channel, e.g. bsc:0.05")
    sp.add_argument("--output", required=True)

    sp = add("experiment", cmd_experiment, "theoretical vs practical symbol tables")
    sp.add_argument("--table", choices=[t.value for t in Table], required=True)
    sp.add_argument("--seeds", type=int, default=3)
    sp.add_argument("--n", type=int)
    sp.add_argument("--channels", nargs="+")
    sp.add_argument("--format", choices=("csv", "json", "table"), default="csv")
    sp.add_argument("--output")

    sp = add("oracle", cmd_oracle, "Monte-Carlo error of exhaustive binning")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--channel", required=True)
    sp.add_argument("--rates", nargs="+", required=True,
                    help="sum rates to sweep; a comma list gives the stage rates of one point")
    sp.add_argument("--trials", type=int, default=10000)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--closed", action="store_true", help="closed typicality window")
    sp.add_argument("--output")

    sp = add("gaussian", cmd_gaussian, "Wyner-Ziv points for Gaussian neighbours")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--source", type=int, required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--sigma", type=float, default=1.0)
    sp.add_argument("--output")

    sp = add("serve", cmd_serve, "run the extraction server")
    sp.add_argument("--data-dir", required=True)
    sp.add_argument("--port", type=int, default=8080)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--graph")
    sp.add_argument("--model")
    sp.add_argument("--n", type=int)
    sp.add_argument("--universal", action="store_true")
    return p


def main(argv=None):
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.func(a) or EXIT_OK
    except argparse.ArgumentTypeError as exc:
        print(f"smra: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrityError, StorageInsufficient) as exc:
        print(f"smra: decode failure: {exc}", file=sys.stderr)
        return EXIT_DECODE
    except (SmraError, OSError, ValueError, KeyError) as exc:
        print(f"smra: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
