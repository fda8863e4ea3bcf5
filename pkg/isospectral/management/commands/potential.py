"""
Tabulate a deformed potential next to the potential it deforms.

Usage:
    isohydra potential --family two-param --l 3 --nu1 -10 --nu2 -10 --out v_tilde.csv
    isohydra potential --family fernandez --l 2 --gamma -5
    isohydra potential --family intermediate --l 3 --nu2 2 --format json
"""
from isospectral.cli import IsohydraCommand, RunConfig, family_potential


class Command(IsohydraCommand):
    help = 'Tabulate r, V_base, V_deformed and their difference'

    def run(self, config: RunConfig) -> None:
        base, deformed = family_potential(config, config.grid())
        self.emit_table(config, {
            'r': base.r,
            'V_base': base.values,
            'V_deformed': deformed.values,
            'delta': deformed.values - base.values,
        })
