"""Command-line interface.

Subcommands: encode (ad | request), decode, pow (solve | verify),
experiment (infiltration | footprint), estimate-cost, simulate. Hex
arguments and outputs are lowercase without separators. A --config INI file
supplies defaults; explicit flags win.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from . import _kernels
from .config import load_config, parse_fraction, setting
from .errors import AnonBootError
from .experiments import (
    DEFAULT_CAPACITIES,
    DEFAULT_MESSAGE_COUNTS,
    DEFAULT_NETWORK_SIZES,
    InfiltrationConfig,
    estimate_cost,
    footprint_csv,
    infiltration_csv,
    run_footprint,
    run_infiltration,
)
from .pow import PowParams, PowInput, pow_solve, pow_verify
from .pulse import format_state
from .simulation import ScenarioConfig, run_scenario
from .wire import (
    OpReturnScript,
    PeerAdvertisement,
    ServiceRequest,
    decode_message,
    encode_address,
    encode_peer_advertisement,
    encode_service_request,
    peer_capabilities,
    request_capabilities,
)


def _hex_bytes(text: str) -> bytes:
    try:
        return bytes.fromhex(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid hex: {text!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anonboot",
        description="Blockchain-anchored bootstrapping of anonymity services",
    )
    parser.add_argument("--config", help="INI configuration file")
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="encode a message to script hex")
    enc_sub = enc.add_subparsers(dest="message", required=True)
    enc_ad = enc_sub.add_parser("ad", help="peer advertisement")
    enc_ad.add_argument("--pubkey", type=_hex_bytes, required=True,
                        help="33-byte compressed public key (hex)")
    enc_ad.add_argument("--host", default="127.0.0.1", help="IPv4 or IPv6 address")
    enc_ad.add_argument("--port", type=int, default=9000)
    enc_ad.add_argument("--service-id", type=int, required=True)
    enc_ad.add_argument("--caps", type=_hex_bytes, default=b"",
                        help="up to 12 service-specific capability bytes (hex)")
    enc_ad.add_argument("--nonce", type=_hex_bytes, required=True,
                        help="8-byte PoW nonce (hex)")
    enc_ad.add_argument("--direct", action="store_true",
                        help="set the direct-reachability flag")
    enc_req = enc_sub.add_parser("request", help="service request")
    enc_req.add_argument("--service-id", type=int, required=True)
    enc_req.add_argument("--committee-size", type=int, required=True,
                         help="requested committee size k")
    enc_req.add_argument("--caps", type=_hex_bytes, default=b"",
                         help="up to 12 service-specific requirement bytes (hex)")
    enc_req.add_argument("--nonce", type=_hex_bytes, required=True,
                         help="8-byte entropy nonce (hex)")

    dec = sub.add_parser("decode", help="decode a script hex dump")
    dec.add_argument("script", type=_hex_bytes, help="full OP_RETURN script (hex)")

    pw = sub.add_parser("pow", help="solve or verify advertisement PoW")
    pw_sub = pw.add_subparsers(dest="action", required=True)
    for name in ("solve", "verify"):
        p = pw_sub.add_parser(name)
        p.add_argument("--pubkey", type=_hex_bytes, required=True)
        p.add_argument("--pulse", type=_hex_bytes, required=True,
                       help="32-byte pulse block hash (hex)")
        p.add_argument("--bits", type=int, required=True)
        p.add_argument("--scheme", default="hash256")
        if name == "solve":
            p.add_argument("--start-nonce", type=_hex_bytes, default=bytes(8))
            p.add_argument("--max-attempts", type=int, default=1 << 24)
        else:
            p.add_argument("--nonce", type=_hex_bytes, required=True)

    exp = sub.add_parser("experiment", help="run an evaluation experiment")
    exp_sub = exp.add_subparsers(dest="experiment", required=True)
    inf = exp_sub.add_parser("infiltration", help="Monte Carlo robustness table")
    inf.add_argument("--repository-size", type=int)
    inf.add_argument("--trials", type=int)
    inf.add_argument("--fractions", help="comma-separated adversary fractions")
    inf.add_argument("--sizes", help="comma-separated committee sizes")
    inf.add_argument("--threshold", help="infiltration threshold (e.g. 1/3)")
    inf.add_argument("--threshold-mode", choices=("ceil", "floor"))
    inf.add_argument("--shortcut", action="store_true",
                     help="use the fast partial sampler instead of the full path")
    inf.add_argument("--threads", type=int, default=0)
    inf.add_argument("--seed", type=int, help="master seed (u64)")
    inf.add_argument("--out", help="CSV output path (default: stdout)")
    fp = exp_sub.add_parser("footprint", help="blocks needed per message burst")
    fp.add_argument("--counts", help="comma-separated message counts")
    fp.add_argument("--capacities", help="comma-separated per-block capacities")
    fp.add_argument("--max-block-weight", type=int)
    fp.add_argument("--message-weight", type=int)
    fp.add_argument("--out", help="CSV output path (default: stdout)")

    cost = sub.add_parser("estimate-cost", help="fee of one on-chain message")
    cost.add_argument("--tx-size", type=int, default=307, help="bytes")
    cost.add_argument("--fee-rate", type=int, default=6, help="satoshi per byte")
    cost.add_argument("--btc-price", default="9067", help="USD per BTC")

    sim = sub.add_parser("simulate", help="scripted multi-pulse end-to-end run")
    sim.add_argument("--peers", type=int, default=20, help="honest peers")
    sim.add_argument("--adversarial", type=int, default=5, help="wrong-key peers")
    sim.add_argument("--requests", type=int, default=2)
    sim.add_argument("--pulses", type=int, default=3)
    sim.add_argument("--pulse-length", type=int)
    sim.add_argument("--negotiation-length", type=int)
    sim.add_argument("--difficulty-bits", type=int)
    sim.add_argument("--capacity")
    sim.add_argument("--service-ttl", type=int)
    sim.add_argument("--committee-size", type=int, default=3)
    sim.add_argument("--circuit-length", type=int, default=3)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--dump-state", action="store_true")
    sim.add_argument("--export-chain", help="write the mined chain to this path")

    ver = sub.add_parser("version", help="print version and kernel backend")
    del ver
    return parser


def _cmd_encode(args) -> int:
    if args.message == "ad":
        address, is_ipv6 = encode_address(args.host)
        ad = PeerAdvertisement(
            connector_pubkey=args.pubkey,
            address=address,
            port=args.port,
            service_id=args.service_id,
            capabilities=peer_capabilities(args.caps),
            nonce=args.nonce,
            flag_direct=args.direct,
            flag_ipv6=is_ipv6,
        )
        script = encode_peer_advertisement(ad)
    else:
        request = ServiceRequest(
            service_id=args.service_id,
            capabilities=request_capabilities(args.committee_size, args.caps),
            nonce=args.nonce,
        )
        script = encode_service_request(request)
    print(bytes(script).hex())
    return 0


def _cmd_decode(args) -> int:
    message = decode_message(OpReturnScript.from_bytes(args.script))
    if isinstance(message, PeerAdvertisement):
        print("type: peer_advertisement")
        print(f"pubkey: {message.connector_pubkey.hex()}")
        print(f"host: {message.host}")
        print(f"port: {message.port}")
        print(f"service_id: {message.service_id}")
        print(f"capabilities: {message.capabilities.hex()}")
        print(f"nonce: {message.nonce.hex()}")
        print(f"direct: {message.flag_direct}")
        print(f"ipv6: {message.flag_ipv6}")
    else:
        print("type: service_request")
        print(f"service_id: {message.service_id}")
        print(f"committee_size: {message.committee_size}")
        print(f"capabilities: {message.capabilities.hex()}")
        print(f"nonce: {message.nonce.hex()}")
    return 0


def _cmd_pow(args) -> int:
    params = PowParams(args.bits, args.scheme)
    if args.action == "solve":
        nonce = pow_solve(
            args.pubkey, args.pulse, params,
            start_nonce=args.start_nonce, max_attempts=args.max_attempts,
        )
        print(nonce.hex())
        return 0
    valid = pow_verify(PowInput(args.pubkey, args.pulse, args.nonce), params)
    print("valid" if valid else "invalid")
    return 0 if valid else 1


def _parse_list(text: str | None, parse_item):
    if text is None:
        return None
    return tuple(parse_item(part) for part in text.split(",") if part.strip())


def _cmd_experiment(args, file_config: dict) -> int:
    if args.experiment == "infiltration":
        section = file_config.get("infiltration")
        config = InfiltrationConfig(
            repository_size=setting(
                args.repository_size, section, "repository_size", 1000
            ),
            adversary_fractions=setting(
                _parse_list(args.fractions, parse_fraction), section, "fractions",
                InfiltrationConfig().adversary_fractions,
            ),
            network_sizes=setting(
                _parse_list(args.sizes, int), section, "sizes",
                DEFAULT_NETWORK_SIZES,
            ),
            trials=setting(args.trials, section, "trials", 100_000),
            infiltration_threshold=setting(
                parse_fraction(args.threshold) if args.threshold else None,
                section, "threshold", Fraction(1, 3),
            ),
            threshold_mode=setting(
                args.threshold_mode, section, "threshold_mode", "ceil"
            ),
            master_seed=setting(args.seed, section, "seed", 0),
            shortcut=args.shortcut,
            threads=args.threads,
        )
        rows = run_infiltration(config)
        _write_csv(args.out, rows, infiltration_csv)
        return 0
    section = file_config.get("chain")
    rows = run_footprint(
        message_counts=_parse_list(args.counts, int) or DEFAULT_MESSAGE_COUNTS,
        capacities=_parse_list(args.capacities, parse_fraction)
        or DEFAULT_CAPACITIES,
        max_block_weight=setting(
            args.max_block_weight, section, "max_block_weight", 4_000_000
        ),
        message_weight=setting(args.message_weight, section, "message_weight", 901),
    )
    _write_csv(args.out, rows, footprint_csv)
    return 0


def _write_csv(path, rows, writer) -> None:
    if path:
        with open(path, "w", newline="") as handle:
            writer(rows, handle)
    else:
        writer(rows, sys.stdout)


def _cmd_estimate_cost(args) -> int:
    estimate = estimate_cost(args.tx_size, args.fee_rate, args.btc_price)
    print(f"{estimate.fee_sat} sat")
    print(f"{estimate.fee_usd} USD")
    return 0


def _cmd_simulate(args, file_config: dict) -> int:
    pulse = file_config.get("pulse")
    scenario = ScenarioConfig(
        honest_peers=args.peers,
        adversarial_peers=args.adversarial,
        requests=args.requests,
        pulses=args.pulses,
        pulse_length=setting(args.pulse_length, pulse, "pulse_length", 12),
        negotiation_length=setting(
            args.negotiation_length, pulse, "negotiation_length", 3
        ),
        difficulty_bits=setting(args.difficulty_bits, pulse, "difficulty_bits", 8),
        capacity=Fraction(
            setting(
                parse_fraction(args.capacity) if args.capacity else None,
                pulse, "capacity", Fraction(1, 4),
            )
        ),
        service_ttl=setting(args.service_ttl, pulse, "service_ttl", 2),
        committee_size=args.committee_size,
        circuit_length=args.circuit_length,
        seed=args.seed,
    )
    report = run_scenario(scenario)
    print(report.summary())
    if args.dump_state:
        print(format_state(report.final_state), end="")
    if args.export_chain:
        with open(args.export_chain, "w") as handle:
            handle.write(report.exported_chain)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    file_config: dict = {}
    if args.config:
        file_config = load_config(args.config)
    try:
        if args.command == "encode":
            return _cmd_encode(args)
        if args.command == "decode":
            return _cmd_decode(args)
        if args.command == "pow":
            return _cmd_pow(args)
        if args.command == "experiment":
            return _cmd_experiment(args, file_config)
        if args.command == "estimate-cost":
            return _cmd_estimate_cost(args)
        if args.command == "simulate":
            return _cmd_simulate(args, file_config)
        if args.command == "version":
            from . import __version__

            print(f"anonboot {__version__} (kernel backend: {_kernels.BACKEND})")
            return 0
    except AnonBootError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
