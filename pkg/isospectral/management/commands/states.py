"""
Tabulate the eigenfunctions of a deformed Hamiltonian and their densities.

Usage:
    isohydra states --family two-param --l 3 --nu1 -10 --nu2 -10 --nmax 6
    isohydra states --family fernandez --l 2 --gamma -5
    isohydra states --family intermediate --l 3 --nu2 2 --out psi_star.csv
"""
import logging
from typing import Dict, List

import numpy as np

from isospectral.cli import Family, IsohydraCommand, RunConfig
from isospectral.factorization import psi_star_states
from isospectral.families import (
    DeformedState,
    abraham_moses_gamma,
    deformed_states,
    fernandez_denominator_zero,
    nu2_from_gamma,
)
from isospectral.hydrogen import radial_eigenfunction
from isospectral.numerics import DomainError
from isospectral.seeds import FamilyParams, SingularFamily

logger = logging.getLogger(__name__)


def build_states(config: RunConfig) -> List[DeformedState]:
    """States of the configured family, lowest level first."""
    grid = config.grid()
    n_max = config.n_max or config.l + 2
    if config.family is Family.TWO_PARAM:
        return deformed_states(config.family_params(), grid, n_max, config.tolerances)
    if config.family is Family.INTERMEDIATE:
        return psi_star_states(config.l, config.nu2, n_max, grid)
    if config.family is Family.FERNANDEZ:
        zero = fernandez_denominator_zero(config.l, config.gamma)
        if zero is not None:
            raise SingularFamily(f"The one-parameter denominator vanishes at r={zero:.6g} for gamma={config.gamma}",
                                 radius=zero)
        if config.gamma == abraham_moses_gamma(config.l):
            raise DomainError(f"At gamma={config.gamma:.6g} the level -1/{config.l}^2 is deleted "
                              f"and its state is not normalizable")
        # index l of the one-parameter family is index l+1 of the two-parameter one with nu1 = 0
        params = FamilyParams(l=config.l + 1, nu1=0.0, nu2=nu2_from_gamma(config.l, config.gamma))
        return deformed_states(params, grid, max(n_max, params.l), config.tolerances)
    states = []
    for n in range(config.l + 1, n_max + 1):
        table = radial_eigenfunction(n, config.l, grid)
        states.append(DeformedState(label=table.label, energy=-1.0 / n ** 2, table=table, constant=1.0,
                                    measured_norm=table.norm()))
    return states


class Command(IsohydraCommand):
    help = 'Tabulate r, psi and |psi|^2 for every state of the configured family'

    def run(self, config: RunConfig) -> None:
        states = build_states(config)
        columns: Dict[str, np.ndarray] = {'r': states[0].table.r}
        norms = {}
        for state in states:
            normalized = state.normalized()
            columns[state.label] = normalized.values
            columns[f'|{state.label}|^2'] = normalized.values ** 2
            norms[state.label] = {'energy': state.energy, 'measured_norm': state.measured_norm,
                                  'norm': normalized.norm()}
        logger.info(f"Tabulated {len(states)} states for {config.params_dict()}")
        self.emit_table(config, columns, extra_metadata={'states': norms})
