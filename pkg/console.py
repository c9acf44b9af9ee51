#!/usr/bin/python3
""" console """

import cmd
import logging
import shlex  # for splitting the line along spaces except in double quotes
import sys

import numpy as np

import models
from models.analysis import SingularMatrixError, chain_pair, \
    contraction_factor, fixed_point_report, stationarity_residual
from models.engine.file_storage import FileStorage
from models.env_bundle import generators, load_env
from models.harness import emit_csv, load_config, run_experiment
from models.mdp import ChainError
from models.schedule import parse_schedule

usage = """usage: console.py <command> [flags]
  run   --config <path>
  solve --env <name|path> --schedule <spec> [--mode on|off] [--eta <v>]
        [--seed <k>] [--out <path>]
  check --env <name|path> [--schedule <spec>] [--eta <v>] [--seed <k>]
  gen   --env <name> [--seed <k>] --out <path>"""

expected_errors = (ValueError, np.linalg.LinAlgError, OSError)


def _fmt(value):
    """matrices and vectors as indented text"""
    return np.array2string(np.asarray(value, dtype=float), precision=6,
                           max_line_width=78, suppress_small=True)


def _verdict(holds):
    """PASS / FAIL"""
    return "PASS" if holds else "FAIL"


class TDScheduleCommand(cmd.Cmd):
    """ λ-schedule console """
    prompt = '(tdschedule) '

    def __init__(self, *args, **kwargs):
        """starts with a clean exit status"""
        super().__init__(*args, **kwargs)
        self.status = 0

    def do_EOF(self, arg):
        """Exits console"""
        return True

    def emptyline(self):
        """ overwriting the emptyline method """
        return False

    def do_quit(self, arg):
        """Quit command to exit the program"""
        return True

    def default(self, line):
        """rejects unknown commands with the usage text"""
        if line.strip() in ("--help", "-h"):
            print(usage)
            return False
        print("** unknown command: {} **".format(line.split()[0]))
        print(usage)
        self.status = 1
        return False

    def _fail(self, message):
        """one-line diagnostic and a nonzero status"""
        print("** {} **".format(message))
        self.status = 1

    def _flag_parser(self, command, arg, allowed, required=()):
        """
        Parse `--key value` pairs.

        Returns the flag dictionary, or None after printing help or a
        diagnostic.
        """
        try:
            args = shlex.split(arg)
        except ValueError as err:
            self._fail(err)
            return None
        if "--help" in args or "-h" in args:
            print(getattr(self, "do_" + command).__doc__)
            return None
        flags = {}
        while args:
            key = args.pop(0)
            if not key.startswith("--") or key[2:] not in allowed:
                self._fail("unknown flag for {}: {}".format(command, key))
                print(usage)
                return None
            if not args:
                self._fail("flag {} needs a value".format(key))
                return None
            flags[key[2:]] = args.pop(0)
        missing = [k for k in required if k not in flags]
        if missing:
            self._fail("{} needs --{}".format(command, ", --".join(missing)))
            return None
        return flags

    def _number_flags(self, flags):
        """converts --seed and --eta"""
        flags["seed"] = int(flags.get("seed", 0))
        if "eta" in flags:
            flags["eta"] = float(flags["eta"])
        return flags

    def do_run(self, arg):
        """run --config <path>
        Runs the experiment described by a TOML file and writes its CSVs"""
        flags = self._flag_parser("run", arg, ("config",), ("config",))
        if flags is None:
            return False
        try:
            config = load_config(flags["config"])
            result = run_experiment(config)
            if config.out:
                paths = emit_csv(result, config.out)
        except expected_errors as err:
            self._fail(err)
            return False
        last_step, stats = result.aggregate()[-1]
        print("runs: {}  diverged: {}".format(len(result.series),
                                              result.diverged_runs))
        for name in result.metrics:
            mean, se, count = stats[name]
            print("step {} {}: {!r} (se {!r}, {} runs)".format(
                last_step, name, mean, se, count))
        if config.out:
            print("wrote {} and {}".format(*paths))

    def do_solve(self, arg):
        """solve --env <name|path> --schedule <spec> [--mode on|off]
        [--eta <v>] [--seed <k>] [--out <path>]
        Prints A, b, C, θ*, certificates and the errors of θ = 0"""
        flags = self._flag_parser(
            "solve", arg, ("env", "schedule", "mode", "eta", "seed", "out"),
            ("env", "schedule"))
        if flags is None:
            return False
        try:
            flags = self._number_flags(flags)
            bundle = load_env(flags["env"], flags["seed"])
            report = fixed_point_report(bundle, flags["schedule"],
                                        flags.get("mode", "on"),
                                        flags.get("eta"))
            if "out" in flags:
                storage = FileStorage(flags["out"])
                storage.reload()
                report.save(storage)
        except expected_errors as err:
            self._fail(err)
            return False
        print("env: {}  mode: {}  schedule: {}".format(
            report.env, report.mode, report.schedule))
        print("A =\n{}".format(_fmt(report.A)))
        print("b = {}".format(_fmt(report.b)))
        print("C =\n{}".format(_fmt(report.C)))
        print("theta* = {}".format(_fmt(report.theta_star)))
        if report.reduced:
            print("features have rank {}: solved on their row space".format(
                report.rank))
        print("A negative definite: {} (max sym eig {!r})".format(
            _verdict(report.a_negative_definite), report.max_sym_eig_A))
        print("C positive definite: {} (min eig {!r})".format(
            _verdict(report.c_positive_definite), report.min_eig_C))
        if report.gtd is not None:
            print("G stable: {} (abscissa {!r}, max sym eig {!r})".format(
                _verdict(report.gtd["holds"]),
                report.gtd["spectral_abscissa"],
                report.gtd["max_sym_eig_G"]))
        print("rmse(0) = {!r}  rmspbe(0) = {!r}".format(
            report.rmse_zero, report.rmspbe_zero))
        if "out" in flags:
            print("saved {} to {}".format(report.id, flags["out"]))

    def do_check(self, arg):
        """check --env <name|path> [--schedule <spec>] [--eta <v>] [--seed <k>]
        Prints every chain invariant and definiteness certificate"""
        flags = self._flag_parser("check", arg,
                                  ("env", "schedule", "eta", "seed"),
                                  ("env",))
        if flags is None:
            return False
        try:
            flags = self._number_flags(flags)
            bundle = load_env(flags["env"], flags["seed"])
            schedule = parse_schedule(flags.get("schedule",
                                                "equal_weights(2,4)"))
        except expected_errors as err:
            self._fail(err)
            return False
        eta = flags.get("eta", 1.0)
        rows = bundle.mdp.transitions.sum(axis=-1)
        print("transition rows stochastic: PASS (max deviation {!r})".format(
            float(np.abs(rows - 1.0).max())))
        try:
            pair = chain_pair(bundle, "on")
            print("behavior chain stationary: PASS (residual {!r})".format(
                stationarity_residual(bundle.continuing_matrix(
                    bundle.behavior), pair.d)))
        except ChainError as err:
            self._fail(err)
            return False
        modes = ["on"] if bundle.target is None else ["on", "off"]
        for mode in modes:
            try:
                report = fixed_point_report(bundle, schedule, mode, eta)
            except (ChainError, SingularMatrixError) as err:
                print("{}-policy certificates unavailable: {}".format(
                    mode, err))
                continue
            label = "on-policy TD" if mode == "on" else "off-policy TD"
            print("{} A negative definite: {} (max sym eig {!r})".format(
                label, _verdict(report.a_negative_definite),
                report.max_sym_eig_A))
            print("{} C positive definite: {} (min eig {!r})".format(
                label, _verdict(report.c_positive_definite),
                report.min_eig_C))
            print("{} -A^T C^-1 A negative definite: {}".format(
                label, _verdict(report.quadratic_negative_definite)))
            if mode == "on":
                factor = contraction_factor(chain_pair(bundle, mode),
                                            bundle.gamma, schedule)
                print("{} |M|_D <= gamma: {} ({!r} vs {!r})".format(
                    label, _verdict(factor <= bundle.gamma + 1e-12), factor,
                    bundle.gamma))
            print("{} G stable (eta {!r}): {} (abscissa {!r})".format(
                label, eta, _verdict(report.gtd["holds"]),
                report.gtd["spectral_abscissa"]))

    def do_gen(self, arg):
        """gen --env <name> [--seed <k>] --out <path>
        Generates a benchmark environment and saves it as an env file"""
        flags = self._flag_parser("gen", arg, ("env", "seed", "out"),
                                  ("env", "out"))
        if flags is None:
            return False
        if flags["env"] not in generators:
            self._fail("unknown environment: {} (one of {})".format(
                flags["env"], ", ".join(generators)))
            return False
        try:
            flags = self._number_flags(flags)
            bundle = generators[flags["env"]](flags["seed"])
            storage = FileStorage(flags["out"])
            bundle.save(storage)
        except expected_errors as err:
            self._fail(err)
            return False
        print("saved {} {} to {}".format(bundle.name, bundle.id,
                                         flags["out"]))


def cli_main(argv=None):
    """runs one command from argv, or the interactive loop without one"""
    level = getattr(logging, models.log_level_t, logging.WARNING)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s")
    console = TDScheduleCommand()
    if not argv:
        console.cmdloop()
        return 0
    console.onecmd(shlex.join(argv))
    return console.status


if __name__ == '__main__':
    sys.exit(cli_main(sys.argv[1:]))
