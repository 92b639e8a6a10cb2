import logging
import signal
import sys
from pathlib import Path
from typing import Iterable, Optional

import click
from pydantic import ValidationError

from app.core.config import Settings, get_settings
from app.core.exceptions import ConfigError
from app.core.exception_handlers import handle_exception
from app.core.logging_config import setup_logging
from app.planner.estimate import load_override
from app.routers.commands import run_command
from app.services.session import Session

logger = logging.getLogger(__name__)

PROMPT = "rg> "
QUIT = (".quit", ".exit")


class ShellManager:
    """
    Manages the lifecycle of a shell session: batch scripts, the interactive loop and
    graceful shutdown on termination signals.

    Attributes:
        settings (Settings): The settings the session was built from.
        session (Session): The session every line runs against.
        stopping (bool): Set once a shutdown was requested; the loops stop before the
            next line.
    """

    def __init__(self, settings: Settings, session: Session):
        self.settings = settings
        self.session = session
        self.stopping = False
        logger.info("🔧 ShellManager initialized.")

    @staticmethod
    def statements(lines: Iterable[str]) -> Iterable[str]:
        """Non-empty lines that are not `--` or `#` comments."""
        for line in lines:
            text = line.strip()
            if text and not text.startswith(("--", "#")):
                yield text

    def run_script(self, path: str) -> int:
        """
        Runs a script line by line, stopping at the first failing line.

        Args:
            path (str): The script file.

        Returns:
            int: 0 when every line succeeded, else the failing line's exit code.
        """
        logger.info(f"🚀 Running script {path}")
        for text in self.statements(Path(path).read_text(encoding="utf-8").splitlines()):
            if self.stopping or text in QUIT:
                break
            result = run_command(self.session, text)
            click.echo(result.output)
            if result.exit_code:
                logger.warning(f"⚠️ Script stopped at: {text}")
                return result.exit_code
        logger.info("✅ Script finished.")
        return 0

    def run_interactive(self) -> int:
        """Reads lines from stdin until EOF or `.quit`; errors are printed and the loop goes on."""
        stream = click.get_text_stream("stdin")
        prompt = stream.isatty()
        while not self.stopping:
            if prompt:
                click.echo(PROMPT, nl=False)
            try:
                line = stream.readline()
            except KeyboardInterrupt:
                self.shutdown()
                break
            if not line:
                break
            for text in self.statements([line]):
                if text in QUIT:
                    self.shutdown()
                    break
                click.echo(run_command(self.session, text).output)
        return 0

    def shutdown(self):
        logger.info("🛑 Shutting down shell...")
        self.stopping = True
        logger.info("✅ Shell stopped.")

    def install_signal_handlers(self):
        """
        Installs a SIGTERM handler that requests a shutdown after the running line.
        SIGINT reaches the interactive loop as KeyboardInterrupt.
        """

        def handle_signal(sig, frame):
            logger.warning(f"🔻 Received termination signal: {sig}")
            self.shutdown()

        signal.signal(signal.SIGTERM, handle_signal)
        logger.info("📶 Signal handlers installed.")

    def run(self, script: Optional[str] = None) -> int:
        logger.info("🟢 Running ShellManager...")
        self.install_signal_handlers()
        if script:
            return self.run_script(script)
        return self.run_interactive()


def build_settings(**overrides) -> Settings:
    """
    Environment settings with the non-empty command-line overrides applied and the
    result validated again.

    Raises:
        ConfigError: If the environment or an override violates a settings constraint.
    """
    values = {k: v for k, v in overrides.items() if v is not None}
    try:
        return Settings.model_validate({**get_settings().model_dump(), **values})
    except ValidationError as e:
        error = e.errors()[0]
        raise ConfigError(f"invalid setting {error['loc'][0]}: {error['msg']}") from e


@click.command()
@click.option("--script", type=click.Path(exists=True, dir_okay=False), help="Run a command file, then exit.")
@click.option("--no-timing", is_flag=True, help="Leave timings out of query and bench output.")
@click.option("--format", "output_format", type=click.Choice(["csv", "tsv", "table"]), help="Result format.")
@click.option("--tau", type=float, help="Ratio of sequential to random access cost.")
@click.option("--chunk-size", type=int, help="Rows per executor chunk.")
@click.option("--block-size", type=int, help="Fixed block size in bytes.")
@click.option("--segment-threshold", type=int, help="Fragments at least this large live in blocks.")
@click.option("--stats", "stats_path", type=click.Path(), help="Planner statistics override (TOML).")
@click.option("--log-level", help="Logging level on stderr.")
def main(script, no_timing, output_format, tau, chunk_size, block_size, segment_threshold, stats_path, log_level):
    """Embedded graph-relational engine shell."""
    try:
        settings = build_settings(
            OUTPUT_FORMAT=output_format,
            TAU=tau,
            CHUNK_SIZE=chunk_size,
            BLOCK_SIZE=block_size,
            SEGMENT_THRESHOLD=segment_threshold,
            LOG_LEVEL=log_level,
        )
        setup_logging(settings.LOG_LEVEL)
        session = Session(settings, load_override(stats_path) if stats_path else None)
    except Exception as exc:
        message, code = handle_exception(exc)
        click.echo(message)
        sys.exit(code)
    session.timing = not no_timing
    manager = ShellManager(settings, session)
    sys.exit(manager.run(script))


if __name__ == "__main__":
    main()
