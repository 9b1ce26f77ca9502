"""
Командная строка: единая точка входа для всех этапов обработки
"""
import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import pandas as pd

from .config import DEFAULT_RIDGE, PipelineConfig, load_config, setup_logging
from .errors import ConfigError, SwbError, WellbeingError
from .estimators import EstimatorFactory
from .file_utils import missing_paths, save_results_to_json, write_frame_csv
from .isa import (CategorySet, OpinionDistribution, bootstrap_ci, estimate_cells, estimate_conditional,
                  training_priors)
from .leadlag import LagGrid, estimate_lead_lag, read_series_csv, to_async_pair
from .stats import cca, join_on_key, read_indicators, regress_all, regress_table
from .synth import CorpusSpec, SeriesSpec, gen_corpus, gen_lagged_pair, load_spec, write_series_csv
from .textproc import Document, StemLexicon, build_lexicon, encode, read_corpus, write_corpus
from .wellbeing import (PANEL_COMPONENTS, WellBeingPanel, build_panel, integrate_period, panel_series, read_estimates,
                        summarize_panel)

logger = logging.getLogger("swb")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2


@dataclass
class RunStats:
    """Статистика запуска"""
    command: str = ""
    inputs: int = 0
    outputs: List[Path] = field(default_factory=list)


def _split(value: Optional[str]) -> Optional[List[str]]:
    if value is None:
        return None
    return [item.strip() for item in value.split(",") if item.strip()]


def _distribution_record(distribution: OpinionDistribution) -> Dict[str, Any]:
    return {
        "method": distribution.method,
        "probs": distribution.as_dict(),
        "diagnostics": distribution.diagnostics.to_dict(),
    }


class Pipeline:
    """Выполнение подкоманд с общей конфигурацией"""

    def __init__(self, config: PipelineConfig, args: argparse.Namespace):
        self.config = config
        self.args = args
        self.stats = RunStats(command=" ".join(part for part in (args.command, getattr(args, "action", None)) if part))

    # --- общие шаги ---

    def require_inputs(self, paths: Sequence[Optional[Path]]) -> None:
        """Проверяет входные пути до начала вычислений"""
        missing = missing_paths(paths)
        if missing:
            raise SwbError(f"input not found: {missing[0]}")
        self.stats.inputs = len([p for p in paths if p is not None])

    def saved(self, path: Path) -> None:
        self.stats.outputs.append(Path(path))

    def categories(self) -> CategorySet:
        if not self.config.cats:
            raise ConfigError("categories are required (--cats or 'cats' in the config file)")
        return CategorySet(tuple(self.config.cats), self.config.off_topic)

    def lexicon_for(self, train: List[Document], test: List[Document]) -> StemLexicon:
        if self.config.lexicon is not None:
            lexicon = StemLexicon.load(self.config.lexicon)
            logger.info(f"Словарь загружен: {lexicon.size} основ из {self.config.lexicon}")
            return lexicon
        docs = train if self.config.train_only_lexicon else train + test
        scope = "обучающий корпус" if self.config.train_only_lexicon else "обучающий и тестовый корпуса"
        logger.info(f"Построение словаря: {scope}")
        return build_lexicon(docs, self.config.tokenizer())

    # --- isa ---

    def isa_train(self) -> None:
        args = self.args
        self.require_inputs([args.corpus])
        cats = self.categories()
        docs = read_corpus(args.corpus)
        lexicon = build_lexicon(docs, self.config.tokenizer())
        self.saved(lexicon.save(args.lexicon_out))
        if args.matrix_out is not None:
            cond = estimate_conditional(encode(docs, lexicon), cats)
            record = {
                "categories": list(cats.categories),
                "off_topic": cats.off_topic,
                "counts": dict(zip(cats.categories, cond.counts)),
                "rows": [[lexicon.stems[i] for i in key] for key in cond.row_keys],
                "values": cond.values,
            }
            self.saved(save_results_to_json(record, args.matrix_out))

    def isa_estimate(self) -> None:
        args, cfg = self.args, self.config
        if cfg.train is None or cfg.test is None:
            raise ConfigError("--train and --test are required")
        self.require_inputs([cfg.train, cfg.test, cfg.lexicon])
        if cfg.bootstrap and args.by_cell is not None:
            raise ConfigError("--bootstrap is not supported with --by-cell; estimate each cell separately")
        if cfg.bootstrap and cfg.seed is None:
            raise ConfigError("bootstrap is stochastic and requires an explicit --seed")
        cats = self.categories()

        train_docs, test_docs = read_corpus(cfg.train), read_corpus(cfg.test)
        lexicon = self.lexicon_for(train_docs, test_docs)
        train, test = encode(train_docs, lexicon), encode(test_docs, lexicon)
        cond = estimate_conditional(train, cats)
        priors = training_priors(train, cats) if args.priors == "train" else None
        estimator = EstimatorFactory.create_estimator(cfg.method, cfg.estimator(), priors)

        record: Dict[str, Any] = {"categories": list(cats.categories), "method": cfg.method}
        if args.component is not None:
            record["component"] = args.component

        if args.by_cell is not None:
            cells = estimate_cells(cond, test_docs, test, args.by_cell, estimator)
            record["cells"] = [
                {"period": cell.period, "unit": cell.unit,
                 **_distribution_record(cell.distribution.on_topic() if cfg.on_topic else cell.distribution)}
                for cell in cells
            ]
        else:
            distribution = estimator.estimate(cond, test)
            if cfg.on_topic:
                distribution = distribution.on_topic()
            record.update(_distribution_record(distribution))
            if args.period is not None:
                record["period"] = args.period
            if args.unit is not None:
                record["unit"] = args.unit
            if cfg.bootstrap:
                result = bootstrap_ci(train, test, cats, cfg.bootstrap, cfg.seed, estimate=estimator, jobs=cfg.jobs,
                                      on_topic=cfg.on_topic)
                record["ci"] = result.intervals()
                record["sd"] = result.sds()
                record["bootstrap"] = {"replicates": result.n_boot, "seed": result.seed, "redraws": result.redraws}

        self.saved(save_results_to_json(record, args.out))

    # --- swbi ---

    def swbi_build(self) -> None:
        args = self.args
        self.require_inputs([args.estimates])
        panel = build_panel(read_estimates(args.estimates, tags=tuple(_split(args.tags))))
        self.saved(panel.to_csv(args.out))

    def swbi_integrate(self) -> None:
        args = self.args
        self.require_inputs([args.panel])
        panel = WellBeingPanel.from_csv(args.panel)
        units = [args.unit] if args.unit is not None else sorted({row.unit for row in panel.rows})
        frames = []
        for unit in units:
            try:
                series = panel_series(panel, unit, args.column)
            except WellbeingError as e:
                if args.unit is not None:
                    raise
                logger.warning(f"Единица {unit} пропущена: {e}")
                continue
            frame = integrate_period(series, args.period, average=args.average)
            frame.insert(0, "unit", unit)
            frames.append(frame)
        if not frames:
            raise WellbeingError(f"no unit has {args.column} values")
        self.saved(write_frame_csv(pd.concat(frames, ignore_index=True), args.out))

    def swbi_series(self) -> None:
        args = self.args
        self.require_inputs([args.panel])
        series = panel_series(WellBeingPanel.from_csv(args.panel), args.unit, args.column)
        frame = series.rename("value").rename_axis("ts").reset_index()
        frame["ts"] = frame["ts"].dt.strftime("%Y-%m-%d")
        self.saved(write_frame_csv(frame, args.out))

    def swbi_summary(self) -> None:
        args = self.args
        self.require_inputs([args.panel])
        summary = summarize_panel(WellBeingPanel.from_csv(args.panel), args.period)
        self.saved(write_frame_csv(summary, args.out))

    # --- leadlag, cca, regress ---

    def leadlag(self) -> None:
        args, cfg = self.args, self.config
        self.require_inputs([args.x, args.y])
        x_frame = read_series_csv(args.x, period=args.x_period, stamp=cfg.stamp)
        y_frame = read_series_csv(args.y, period=args.y_period, stamp=cfg.stamp)
        x, y, origin = to_async_pair(x_frame, y_frame)
        result = estimate_lead_lag(x, y, LagGrid(delta=cfg.delta, step=cfg.step), jobs=cfg.jobs)
        record = result.to_dict()
        record.update({"x": x.name, "y": y.name, "origin": origin.isoformat(),
                       "delta": cfg.delta, "step": cfg.step})
        self.saved(save_results_to_json(record, args.out))

    def cca(self) -> None:
        args = self.args
        self.require_inputs([args.x, args.y])
        x, y = join_on_key(read_indicators(args.x, args.key, _split(args.x_columns)),
                           read_indicators(args.y, args.key, _split(args.y_columns)))
        result = cca(x, y)
        self.saved(save_results_to_json(result.to_dict(), args.out))
        if args.scores_out is not None:
            self.saved(write_frame_csv(result.scores_frame(args.key), args.scores_out))

    def regress(self) -> None:
        args, cfg = self.args, self.config
        y_path, _, y_columns = args.y.partition(":")
        self.require_inputs([Path(y_path), args.x])
        ys = read_indicators(y_path, args.key, _split(y_columns) or None)
        x = read_indicators(args.x, args.key, _split(args.x_columns))
        x, ys = join_on_key(x, ys)
        intercept = not args.no_intercept
        results = regress_all(ys, x, intercept=intercept, jobs=cfg.jobs)
        record = {"intercept": intercept, "models": {name: result.to_dict() for name, result in results.items()}}
        self.saved(save_results_to_json(record, args.out))
        if args.table_out is not None:
            table = regress_table(ys, x, intercept=intercept, jobs=cfg.jobs).rename_axis("row").reset_index()
            self.saved(write_frame_csv(table, args.table_out))

    # --- synth ---

    def synth_corpus(self) -> None:
        args = self.args
        self.require_inputs([args.spec])
        corpus = gen_corpus(load_spec(args.spec, CorpusSpec))
        self.saved(write_corpus(corpus.train, args.out_train))
        self.saved(write_corpus(corpus.test, args.out_test))
        self.saved(save_results_to_json(corpus.truth_record(), args.out_truth))

    def synth_series(self) -> None:
        args = self.args
        self.require_inputs([args.spec])
        pair = gen_lagged_pair(load_spec(args.spec, SeriesSpec))
        self.saved(write_series_csv(pair.x, args.out_x, pair.start))
        self.saved(write_series_csv(pair.y, args.out_y, pair.start))
        self.saved(save_results_to_json(pair.truth_record(), args.out_truth))

    def print_stats(self, elapsed_time: float) -> None:
        """Выводит статистику запуска"""
        logger.info("=" * 50)
        logger.info(f"ЗАВЕРШЕНО: {self.stats.command}")
        logger.info("=" * 50)
        logger.info(f"Время выполнения: {elapsed_time:.2f} сек")
        logger.info(f"Входных файлов: {self.stats.inputs}")
        for path in self.stats.outputs:
            logger.info(f"Записано: {path}")
        logger.info("=" * 50)


COMMANDS: Dict[tuple, Callable[[Pipeline], None]] = {
    ("isa", "train"): Pipeline.isa_train,
    ("isa", "estimate"): Pipeline.isa_estimate,
    ("swbi", "build"): Pipeline.swbi_build,
    ("swbi", "integrate"): Pipeline.swbi_integrate,
    ("swbi", "series"): Pipeline.swbi_series,
    ("swbi", "summary"): Pipeline.swbi_summary,
    ("leadlag", None): Pipeline.leadlag,
    ("cca", None): Pipeline.cca,
    ("regress", None): Pipeline.regress,
    ("synth", "corpus"): Pipeline.synth_corpus,
    ("synth", "series"): Pipeline.synth_series,
}


def _global_options() -> argparse.ArgumentParser:
    # SUPPRESS позволяет указывать общие флаги и до, и после подкоманды
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="файл конфигурации 'ключ = значение'")
    parent.add_argument("--log-file", type=Path, default=argparse.SUPPRESS, help="файл журнала")
    parent.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="число потоков")
    parent.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS, help="подробный журнал")
    return parent


def _tokenizer_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--cats", help="категории через запятую, первая - D0 (если не указано --off-topic)")
    parser.add_argument("--off-topic", help="категория D0")
    parser.add_argument("--ngram-min", type=int)
    parser.add_argument("--ngram-max", type=int)
    parser.add_argument("--min-df", type=int)
    parser.add_argument("--stemmer", help="язык SnowballStemmer или none")


def build_parser() -> argparse.ArgumentParser:
    common = _global_options()
    parser = argparse.ArgumentParser(prog="swb", parents=[common],
                                     description="Индекс социального благополучия по текстам и временным рядам")
    commands = parser.add_subparsers(dest="command", required=True)

    isa = commands.add_parser("isa", help="оценка распределения мнений", parents=[common])
    isa_actions = isa.add_subparsers(dest="action", required=True)

    train = isa_actions.add_parser("train", help="словарь основ и матрица P(S|D)", parents=[common])
    train.add_argument("--corpus", type=Path, required=True)
    train.add_argument("--lexicon-out", type=Path, required=True)
    train.add_argument("--matrix-out", type=Path)
    _tokenizer_options(train)

    estimate = isa_actions.add_parser("estimate", help="оценка P(D) тестового корпуса", parents=[common])
    estimate.add_argument("--train", type=Path)
    estimate.add_argument("--test", type=Path)
    estimate.add_argument("--lexicon", type=Path)
    estimate.add_argument("--train-only-lexicon", action="store_true", default=None)
    estimate.add_argument("--method", choices=["inverse", "baseline"])
    estimate.add_argument("--priors", choices=["uniform", "train"], default="uniform")
    estimate.add_argument("--ridge", type=float, nargs="?", const=DEFAULT_RIDGE)
    estimate.add_argument("--strict", action="store_true", default=None)
    estimate.add_argument("--on-topic", action="store_true", default=None)
    estimate.add_argument("--bootstrap", type=int)
    estimate.add_argument("--seed", type=int)
    estimate.add_argument("--component")
    estimate.add_argument("--period")
    estimate.add_argument("--unit")
    estimate.add_argument("--by-cell", choices=["day", "month", "year"])
    estimate.add_argument("--out", type=Path, required=True)
    _tokenizer_options(estimate)

    swbi = commands.add_parser("swbi", help="панель индекса благополучия", parents=[common])
    swbi_actions = swbi.add_subparsers(dest="action", required=True)

    build = swbi_actions.add_parser("build", help="панель из оценок компонент", parents=[common])
    build.add_argument("--estimates", type=Path, required=True)
    build.add_argument("--tags", default="-1,0,1", help="метки кодов -1,0,+1")
    build.add_argument("--out", type=Path, required=True)

    integrate = swbi_actions.add_parser("integrate", help="интегральные значения по периодам", parents=[common])
    integrate.add_argument("--panel", type=Path, required=True)
    integrate.add_argument("--period", choices=["month", "year"], required=True)
    integrate.add_argument("--average", action="store_true")
    integrate.add_argument("--column", default="swbi", choices=(*PANEL_COMPONENTS, "swbi"))
    integrate.add_argument("--unit")
    integrate.add_argument("--out", type=Path, required=True)

    series = swbi_actions.add_parser("series", help="дневной ряд одной единицы", parents=[common])
    series.add_argument("--panel", type=Path, required=True)
    series.add_argument("--unit", required=True)
    series.add_argument("--column", default="swbi", choices=(*PANEL_COMPONENTS, "swbi"))
    series.add_argument("--out", type=Path, required=True)

    summary = swbi_actions.add_parser("summary", help="средние по периодам", parents=[common])
    summary.add_argument("--panel", type=Path, required=True)
    summary.add_argument("--period", choices=["month", "year"], default="year")
    summary.add_argument("--out", type=Path, required=True)

    leadlag = commands.add_parser("leadlag", help="оценка запаздывания", parents=[common])
    leadlag.add_argument("--x", type=Path, required=True)
    leadlag.add_argument("--y", type=Path, required=True)
    leadlag.add_argument("--delta", type=float)
    leadlag.add_argument("--step", type=float)
    leadlag.add_argument("--x-period", choices=["week", "month"])
    leadlag.add_argument("--y-period", choices=["week", "month"])
    leadlag.add_argument("--stamp", choices=["end", "midpoint"])
    leadlag.add_argument("--out", type=Path, required=True)

    canonical = commands.add_parser("cca", help="канонические корреляции", parents=[common])
    canonical.add_argument("--x", type=Path, required=True)
    canonical.add_argument("--y", type=Path, required=True)
    canonical.add_argument("--key", default="unit")
    canonical.add_argument("--x-columns")
    canonical.add_argument("--y-columns")
    canonical.add_argument("--out", type=Path, required=True)
    canonical.add_argument("--scores-out", type=Path)

    regress = commands.add_parser("regress", help="МНК-регрессии", parents=[common])
    regress.add_argument("--y", required=True, help="файл[:столбец,столбец]")
    regress.add_argument("--x", type=Path, required=True)
    regress.add_argument("--key", default="unit")
    regress.add_argument("--x-columns")
    regress.add_argument("--no-intercept", action="store_true")
    regress.add_argument("--out", type=Path, required=True)
    regress.add_argument("--table-out", type=Path)

    synth = commands.add_parser("synth", help="синтетические данные", parents=[common])
    synth_actions = synth.add_subparsers(dest="action", required=True)

    corpus = synth_actions.add_parser("corpus", help="корпус с известным распределением", parents=[common])
    corpus.add_argument("--spec", type=Path, required=True)
    corpus.add_argument("--out-train", type=Path, required=True)
    corpus.add_argument("--out-test", type=Path, required=True)
    corpus.add_argument("--out-truth", type=Path, required=True)

    pair = synth_actions.add_parser("series", help="пара рядов с известным запаздыванием", parents=[common])
    pair.add_argument("--spec", type=Path, required=True)
    pair.add_argument("--out-x", type=Path, required=True)
    pair.add_argument("--out-y", type=Path, required=True)
    pair.add_argument("--out-truth", type=Path, required=True)

    return parser


OVERRIDE_FLAGS = (
    "off_topic", "ngram_min", "ngram_max", "min_df", "stemmer", "train_only_lexicon", "method", "ridge",
    "strict", "on_topic", "bootstrap", "seed", "jobs", "delta", "step", "stamp", "log_file",
    "train", "test", "lexicon",
)


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    """
    Объединяет файл конфигурации и флаги командной строки (флаги важнее)

    Args:
        args: Разобранные аргументы

    Returns:
        Итоговая конфигурация
    """
    base = load_config(getattr(args, "config", None))
    overrides = {name: getattr(args, name, None) for name in OVERRIDE_FLAGS}
    overrides["cats"] = _split(getattr(args, "cats", None))
    return base.merged(overrides)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Выполняет подкоманду

    Args:
        argv: Аргументы командной строки (по умолчанию sys.argv[1:])

    Returns:
        Код завершения: 0 - успех, 1 - ошибка вычислений, 2 - ошибка использования
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    verbose = getattr(args, "verbose", False)
    setup_logging(getattr(args, "log_file", None), verbose)
    start_time = time.time()

    try:
        config = resolve_config(args)
        if config.log_file is not None and getattr(args, "log_file", None) is None:
            setup_logging(config.log_file, verbose)
        logger.info(f"Конфигурация: {json.dumps(config.model_dump(mode='json'), sort_keys=True, ensure_ascii=False)}")

        pipeline = Pipeline(config, args)
        COMMANDS[(args.command, getattr(args, "action", None))](pipeline)
        pipeline.print_stats(time.time() - start_time)
        return EXIT_OK
    except ConfigError as e:
        logger.error(f"[{e.module}] {e}")
        return EXIT_USAGE
    except SwbError as e:
        logger.error(f"[{e.module}] {e}")
        return EXIT_ERROR
    except OSError as e:
        logger.error(f"[io] {e}")
        return EXIT_ERROR
    except KeyboardInterrupt:
        logger.info("Обработка прервана пользователем")
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())
