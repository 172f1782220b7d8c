import functools
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import click
from flask import Blueprint, current_app

from app.utils.ae_norm import brute_force_norm, distance_to_image, norm, verify_certificate
from app.utils.checks import CheckResult, CheckSettings, default_family, run_checks
from app.utils.errors import EquivariantError, StructureError
from app.utils.gspace_core import (
    METRIC,
    PSEUDOMETRIC,
    check_equivariance,
    check_invariance,
    validate_action,
    validate_group,
    validate_metric,
)
from app.utils.instance import SELF, load_instance, space_to_document
from app.utils.inverse_system import build_system, export_system
from app.utils.molecule import ADJOINED, EQ3_LITERAL, INTERNAL, PUSHFORWARD
from app.utils.quotient import factorize, quotient, verify_factorization, verify_quotient
from app.utils.rationals import fmt_rational, parse_rational

logger = logging.getLogger(__name__)

main = Blueprint('main', __name__, cli_group=None)


@dataclass
class RunReport:
    command: Dict[str, Any]
    checks: List[CheckResult] = field(default_factory=list)
    result: Any = None
    started: float = field(default_factory=time.perf_counter)

    @property
    def success(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, report, witnesses: int = 1) -> CheckResult:
        """ValidationReport als benannte Prüfung übernehmen"""
        result = CheckResult(name)
        result.absorb(report, witnesses)
        self.checks.append(result)
        return result

    def to_dict(self, timing: bool = False) -> Dict[str, Any]:
        return {
            "command": self.command,
            "success": self.success,
            "outcome": "pass" if self.success else "fail",
            "checks": [c.to_dict() for c in self.checks],
            "result": self.result,
            "timing": round(time.perf_counter() - self.started, 6) if timing else None,
        }


def _write(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, 'w', encoding='utf-8') as handle:
            handle.write(text)
        logger.info(f"Artefakt nach {out} geschrieben")
    else:
        click.echo(text, nl=False)


def _dumps(payload: Any) -> str:
    # Flasks JSON-Provider sortiert Schlüssel, die Ausgabe ist damit bytegleich reproduzierbar
    return current_app.json.dumps(payload, indent=2) + "\n"


def _command_echo(ctx: click.Context) -> Dict[str, Any]:
    params = {k: v for k, v in sorted(ctx.params.items()) if k not in ('timing',)}
    return {"name": ctx.info_name, "params": params}


def _finish(report: RunReport, out: Optional[str] = None) -> None:
    ctx = click.get_current_context()
    timing = ctx.params.get('timing') or current_app.config['REPORT_TIMING']
    logger.info(f"Befehl {ctx.info_name} nach {time.perf_counter() - report.started:.3f}s beendet")
    _write(_dumps(report.to_dict(timing)), out)
    if not report.success:
        ctx.exit(1)


def handles_errors(command):
    """Fachliche Fehler als maschinenlesbares JSON ausgeben und mit Status 1 beenden"""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return command(*args, **kwargs)
        except EquivariantError as e:
            logger.error(f"Fehler in {ctx.info_name}: {e.message}")
            payload = e.to_dict()
            payload["command"] = _command_echo(ctx)
            click.echo(_dumps(payload), nl=False)
            ctx.exit(1)
    return wrapper


def _radii(text: str):
    return [parse_rational(part, "radii") for part in text.split(",") if part.strip()]


def _settings(samples: Optional[int], seed: Optional[int]):
    cfg = current_app.config
    return (cfg['SAMPLE_COUNT'] if samples is None else samples,
            cfg['SAMPLE_SEED'] if seed is None else seed)


path_argument = click.argument('path', type=click.Path(dir_okay=False))
timing_option = click.option('--timing', is_flag=True, help='Laufzeit in den Bericht aufnehmen.')
out_option = click.option('--out', 'out', default=None, help='Ausgabe in Datei statt stdout.')
mode_option = click.option('--mode', type=click.Choice([ADJOINED, INTERNAL]), default=None,
                           help='Basispunkt: adjungiertes ★ oder interner Fixpunkt.')
basepoint_option = click.option('--basepoint', default=None, help='Interner Basispunkt.')
radii_option = click.option('--radii', default='1', show_default=True, help='Schlauchradien, z.B. 1,2,1/2.')
seed_option = click.option('--seed', type=int, default=None, help='Startwert der Stichproben.')
samples_option = click.option('--samples', type=int, default=None, help='Stichprobengröße pro Bindung.')


def _load(path: str):
    return load_instance(path, current_app.config['GROUP_ORDER_CAP'])


@main.cli.command('validate')
@path_argument
@mode_option
@basepoint_option
@timing_option
@handles_errors
def cmd_validate(path, mode, basepoint, timing):
    """Metrik, Gruppe, Wirkung, Invarianz und Äquivarianz des Dokuments prüfen."""
    ctx = click.get_current_context()
    report = RunReport(_command_echo(ctx))
    instance = _load(path)
    space = instance.space
    report.check("metric", validate_metric(space.metric, METRIC), len(space.points) ** 3)
    report.check("group", validate_group(space.group), len(space.group) ** 3)
    report.check("action", validate_action(space.action), len(space.group) ** 2 * len(space.points))
    report.check("invariance", check_invariance(space.metric, space.action))
    for name, mu in instance.pseudometrics.items():
        sub = validate_metric(mu, PSEUDOMETRIC)
        sub.extend(check_invariance(mu, space.action))
        report.check(f"pseudometrics.{name}", sub)
    for name, target in instance.spaces.items():
        if name == SELF:
            continue
        sub = validate_metric(target.metric, METRIC)
        sub.extend(validate_action(target.action))
        sub.extend(check_invariance(target.metric, target.action))
        report.check(f"spaces.{name}", sub)
    for name, f in instance.maps.items():
        report.check(f"maps.{name}", check_equivariance(f))

    based = instance.based(mode, basepoint, allow_nonfixed=True)
    for name in instance.molecules:
        result = CheckResult(f"molecules.{name}")
        try:
            instance.molecule(name, based)
            result.record(True, (name,))
        except StructureError as e:
            result.record(False, (name, e.axiom), e.message)
        report.checks.append(result)
    report.result = {"points": len(space.points), "group_order": len(space.group), "based": based.describe()}
    _finish(report)


@main.cli.command('norm')
@path_argument
@click.option('--molecule', 'molecule_name', required=True, help='Name des Moleküls im Dokument.')
@click.option('--oracle', is_flag=True, help='Gegen das Aufzählungsorakel prüfen.')
@click.option('--distance', is_flag=True, help='Abstand zum eingebetteten Bild mitberechnen.')
@mode_option
@basepoint_option
@out_option
@timing_option
@handles_errors
def cmd_norm(path, molecule_name, oracle, distance, mode, basepoint, out, timing):
    """Zertifizierte Arens-Eells-Norm eines benannten Moleküls."""
    ctx = click.get_current_context()
    report = RunReport(_command_echo(ctx))
    instance = _load(path)
    based = instance.based(mode, basepoint)
    m = instance.molecule(molecule_name, based)

    result = norm(m, based)
    report.check("certificate", verify_certificate(m, result, based))
    payload = {"molecule": m.to_dict(based.points), "based": based.describe(),
               "norm": result.to_dict(based.points)}
    if oracle:
        cfg = current_app.config
        value = brute_force_norm(m, based, cfg['ORACLE_SUPPORT_CAP'], cfg['ORACLE_POINT_CAP'])
        agreement = CheckResult("oracle")
        agreement.record(value == result.value, (molecule_name,),
                         f"Orakel {fmt_rational(value)} != Norm {fmt_rational(result.value)}")
        report.checks.append(agreement)
        payload["oracle"] = fmt_rational(value)
    if distance:
        value, nearest = distance_to_image(m, based)
        payload["distance_to_image"] = {"value": fmt_rational(value), "nearest": nearest}
    report.result = payload
    _finish(report, out)


@main.cli.command('quotient')
@path_argument
@click.option('--mu', 'mu_name', required=True, help='Name der Pseudometrik.')
@out_option
@timing_option
@handles_errors
def cmd_quotient(path, mu_name, out, timing):
    """Quotienten X_mu mit Quotientenabbildung und induzierter Wirkung bilden."""
    ctx = click.get_current_context()
    report = RunReport(_command_echo(ctx))
    instance = _load(path)
    mu = default_family(instance).get(mu_name)
    q, p = quotient(instance.space, mu)
    report.check("quotient", verify_quotient(mu, q, p))
    payload = q.to_dict()
    payload["assignment"] = dict(p.assignment)
    payload["space"] = space_to_document(q.gspace)
    report.result = payload
    _finish(report, out)


@main.cli.command('factorize')
@path_argument
@click.option('--map', 'map_name', required=True, help='Name der äquivarianten Abbildung.')
@out_option
@timing_option
@handles_errors
def cmd_factorize(path, map_name, out, timing):
    """f = phi ∘ p_mu über die zurückgezogene Pseudometrik faktorisieren."""
    ctx = click.get_current_context()
    report = RunReport(_command_echo(ctx))
    instance = _load(path)
    f = instance.map(map_name)
    equivariance = report.check("equivariance", check_equivariance(f))
    if equivariance.passed:
        fac = factorize(f)
        report.check("factorization", verify_factorization(f, fac))
        payload = fac.to_dict()
        payload["matches"] = [name for name, mu in instance.pseudometrics.items() if mu == fac.mu]
        payload["space"] = space_to_document(fac.quotient.gspace)
        report.result = payload
    _finish(report, out)


def _system(path, radii, samples, seed, with_pullbacks):
    instance = _load(path)
    samples, seed = _settings(samples, seed)
    family = default_family(instance, with_pullbacks)
    return build_system(instance.space, family, _radii(radii),
                        current_app.config['JOIN_CLOSURE_CAP'], samples, seed)


@main.cli.command('system')
@path_argument
@radii_option
@samples_option
@seed_option
@click.option('--with-pullbacks', is_flag=True, help='Zurückgezogene Pseudometriken aller Abbildungen aufnehmen.')
@click.option('--format', 'fmt', type=click.Choice(['json', 'dot']), default='json', show_default=True)
@out_option
@timing_option
@handles_errors
def cmd_system(path, radii, samples, seed, with_pullbacks, fmt, out, timing):
    """Inverses System aufbauen, verifizieren und als Artefakt schreiben."""
    ctx = click.get_current_context()
    report = RunReport(_command_echo(ctx))
    system = _system(path, radii, samples, seed, with_pullbacks)
    report.check("verify_system", system.report, len(system.entries) ** 2)
    report.result = {
        "entries": [e.label for e in system.entries],
        "members": system.family.names(),
        "bonds": len(system.bonds),
        "system": None,
    }
    if system.verified:
        report.result["system"] = current_app.json.loads(export_system(system, "json"))
        if out:
            _write(export_system(system, fmt), out)
    _finish(report)


@main.cli.command('export')
@path_argument
@radii_option
@samples_option
@seed_option
@click.option('--with-pullbacks', is_flag=True, help='Zurückgezogene Pseudometriken aller Abbildungen aufnehmen.')
@click.option('--format', 'fmt', type=click.Choice(['dot', 'json']), default='dot', show_default=True)
@out_option
@handles_errors
def cmd_export(path, radii, samples, seed, with_pullbacks, fmt, out):
    """Verifiziertes System als DOT- oder JSON-Diagramm ausgeben."""
    system = _system(path, radii, samples, seed, with_pullbacks)
    _write(export_system(system, fmt), out)


@main.cli.command('check')
@path_argument
@radii_option
@samples_option
@seed_option
@click.option('--action-mode', type=click.Choice([PUSHFORWARD, EQ3_LITERAL]), default=PUSHFORWARD,
              show_default=True, help='Wirkung auf M(X).')
@mode_option
@basepoint_option
@out_option
@timing_option
@handles_errors
def cmd_check(path, radii, samples, seed, action_mode, mode, basepoint, out, timing):
    """Alle Eigenschaftssuiten gegen die Instanz ausführen."""
    ctx = click.get_current_context()
    report = RunReport(_command_echo(ctx))
    instance = _load(path)
    samples, seed = _settings(samples, seed)
    cfg = current_app.config
    based = instance.based(mode, basepoint, allow_nonfixed=action_mode == EQ3_LITERAL)
    settings = CheckSettings(samples=samples, seed=seed, action_mode=action_mode, radii=_radii(radii),
                             oracle_support_cap=cfg['ORACLE_SUPPORT_CAP'],
                             oracle_point_cap=cfg['ORACLE_POINT_CAP'],
                             join_cap=cfg['JOIN_CLOSURE_CAP'])
    report.checks = run_checks(instance, based, settings)
    report.result = {"based": based.describe(), "action_mode": action_mode,
                     "failed": [c.name for c in report.checks if not c.passed]}
    _finish(report, out)
