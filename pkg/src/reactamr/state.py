"""Component layout shared by the flow and chemistry kernels."""

from __future__ import annotations

from dataclasses import dataclass

RHO, MX, MY, MZ, RHOE, EINT, TEMP = range(7)
SPEC0 = 7
MOMENTUM = (MX, MY, MZ)


@dataclass(frozen=True)
class StateLayout:
    """Density, three momenta, total energy, internal energy, T, then ρY_k."""

    n_species: int

    @property
    def n_comp(self) -> int:
        return SPEC0 + self.n_species

    def species(self, k: int) -> int:
        if not 0 <= k < self.n_species:
            raise IndexError(f"species index {k} out of range")
        return SPEC0 + k

    @property
    def species_slice(self) -> slice:
        return slice(SPEC0, SPEC0 + self.n_species)
