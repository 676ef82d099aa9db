"""Two-port S-parameter data model, Touchstone I/O and tensor conversion.

Internal canonical form is always (Hz, real/imaginary, 50 ohm reference).
Unit and format conversion happens once, at parse time.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, SingularMatrixError, TouchstoneParseError, ValidationError

# Default broadband sweep: 1002 uniformly spaced points on 0.01-20 GHz.
N_POINTS = 1002
FMIN_HZ = 0.01e9
FMAX_HZ = 20e9

FEATURE_CHANNELS = 8

_UNIT_SCALE = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}


@dataclass(frozen=True)
class SParameterMatrix:
    """One 2x2 S-matrix: wave ratios (b1, b2) = S (a1, a2)."""

    s11: complex
    s12: complex
    s21: complex
    s22: complex

    def __post_init__(self):
        for name in ("s11", "s12", "s21", "s22"):
            v = getattr(self, name)
            if not (np.isfinite(v.real) and np.isfinite(v.imag)):
                raise ValidationError(f"{name} is not finite: {v}")

    def as_array(self) -> np.ndarray:
        return np.array([[self.s11, self.s12], [self.s21, self.s22]], dtype=complex)


@dataclass(frozen=True)
class TMatrix:
    """2x2 transfer (cascade) matrix; cascaded two-ports compose by multiplication."""

    t11: complex
    t12: complex
    t21: complex
    t22: complex

    def as_array(self) -> np.ndarray:
        return np.array([[self.t11, self.t12], [self.t21, self.t22]], dtype=complex)


@dataclass(frozen=True)
class SParameterRecord:
    """Frequency sweep of 2x2 S-matrices.

    frequencies: strictly increasing Hz values, shape [n].
    s: complex array of shape [n, 2, 2] with s[i] = [[s11, s12], [s21, s22]].
    """

    frequencies: np.ndarray
    s: np.ndarray
    metadata: str = ""

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        s = np.asarray(self.s, dtype=complex)
        if f.ndim != 1 or f.size < 2:
            raise ValidationError("need at least 2 frequency points")
        if s.shape != (f.size, 2, 2):
            raise ValidationError(f"s shape {s.shape} does not match {f.size} frequencies")
        if np.any(f <= 0):
            raise ValidationError("frequencies must be positive")
        if np.any(np.diff(f) <= 0):
            raise ValidationError("frequencies must be strictly increasing")
        if not np.all(np.isfinite(f)) or not np.all(np.isfinite(s)):
            raise ValidationError("non-finite values in record")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "s", s)
        self.frequencies.setflags(write=False)
        self.s.setflags(write=False)

    def __len__(self):
        return self.frequencies.size

    @property
    def s11(self):
        return self.s[:, 0, 0]

    @property
    def s12(self):
        return self.s[:, 0, 1]

    @property
    def s21(self):
        return self.s[:, 1, 0]

    @property
    def s22(self):
        return self.s[:, 1, 1]

    def matrix_at(self, i: int) -> SParameterMatrix:
        return SParameterMatrix(s11=complex(self.s[i, 0, 0]), s12=complex(self.s[i, 0, 1]),
                                s21=complex(self.s[i, 1, 0]), s22=complex(self.s[i, 1, 1]))

    @staticmethod
    def from_components(frequencies, s11, s12, s21, s22, metadata=""):
        n = len(frequencies)
        s = np.empty((n, 2, 2), dtype=complex)
        s[:, 0, 0] = s11
        s[:, 0, 1] = s12
        s[:, 1, 0] = s21
        s[:, 1, 1] = s22
        return SParameterRecord(frequencies=np.asarray(frequencies, dtype=float), s=s,
                                metadata=metadata)


@dataclass(frozen=True)
class FeatureTensor:
    """Network input: [8, n] stack of Re/Im of s11, s12, s21, s22."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != FEATURE_CHANNELS:
            raise ShapeError(f"feature tensor must be [{FEATURE_CHANNELS}, n], got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("non-finite feature values")
        object.__setattr__(self, "values", v)
        self.values.setflags(write=False)


def _parse_option_line(line: str, line_no: int):
    """Parse `# <unit> S <format> R <z0>`; returns (hz_scale, format)."""
    tokens = line[1:].split()
    unit, fmt, z0 = "ghz", "ma", 50.0  # Touchstone v1.1 defaults
    i = 0
    seen_param = False
    while i < len(tokens):
        tok = tokens[i].lower()
        if tok in _UNIT_SCALE:
            unit = tok
        elif tok in ("ri", "ma", "db"):
            fmt = tok
        elif tok == "s":
            seen_param = True
        elif tok in ("y", "z", "g", "h"):
            raise TouchstoneParseError(f"unsupported parameter type '{tokens[i]}'", line_no)
        elif tok == "r":
            if i + 1 >= len(tokens):
                raise TouchstoneParseError("option line 'R' without impedance value", line_no)
            i += 1
            try:
                z0 = float(tokens[i])
            except ValueError:
                raise TouchstoneParseError(f"bad reference impedance '{tokens[i]}'", line_no)
        else:
            raise TouchstoneParseError(f"unknown option token '{tokens[i]}'", line_no)
        i += 1
    if not seen_param:
        raise TouchstoneParseError("option line missing 'S' parameter type", line_no)
    if abs(z0 - 50.0) > 1e-9:
        raise TouchstoneParseError(f"only 50 ohm reference supported, got {z0}", line_no)
    return _UNIT_SCALE[unit], fmt


def _pair_to_complex(a: float, b: float, fmt: str) -> complex:
    if fmt == "ri":
        return complex(a, b)
    if fmt == "ma":
        return a * np.exp(1j * np.deg2rad(b))
    # dB magnitude, angle in degrees
    return 10.0 ** (a / 20.0) * np.exp(1j * np.deg2rad(b))


def parse_touchstone(text: str) -> SParameterRecord:
    """Parse a Touchstone v1.1 two-port file into a canonical record.

    Accepts RI, MA and DB formats and any of the standard frequency units;
    two-port data lines follow the v1.1 column order
    `f s11 s21 s12 s22` (each parameter as a pair of reals).
    """
    scale = None
    fmt = None
    freqs = []
    rows = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            if scale is not None:
                raise TouchstoneParseError("duplicate option line", line_no)
            scale, fmt = _parse_option_line(line, line_no)
            continue
        if scale is None:
            raise TouchstoneParseError("data before option line", line_no)
        tokens = line.split()
        if len(tokens) != 9:
            raise TouchstoneParseError(
                f"expected 9 columns for two-port data, got {len(tokens)}", line_no)
        try:
            vals = [float(t) for t in tokens]
        except ValueError:
            raise TouchstoneParseError(f"non-numeric data in '{line}'", line_no)
        freqs.append(vals[0] * scale)
        s11 = _pair_to_complex(vals[1], vals[2], fmt)
        s21 = _pair_to_complex(vals[3], vals[4], fmt)
        s12 = _pair_to_complex(vals[5], vals[6], fmt)
        s22 = _pair_to_complex(vals[7], vals[8], fmt)
        rows.append([[s11, s12], [s21, s22]])
    if scale is None:
        raise TouchstoneParseError("missing option line")
    if len(freqs) < 2:
        raise ValidationError("touchstone file has fewer than 2 data points")
    f = np.array(freqs)
    if np.any(np.diff(f) <= 0):
        raise ValidationError("touchstone frequencies not strictly increasing")
    return SParameterRecord(frequencies=f, s=np.array(rows, dtype=complex))


def write_touchstone(record: SParameterRecord) -> str:
    """Serialize a record to a Touchstone v1.1 string (Hz, RI, 50 ohm)."""
    lines = ["! generated by cavityfrac", "# Hz S RI R 50"]
    for i, f in enumerate(record.frequencies):
        entries = [record.s[i, 0, 0], record.s[i, 1, 0], record.s[i, 0, 1], record.s[i, 1, 1]]
        cols = [f"{f:.12e}"]
        for v in entries:
            cols.append(f"{v.real:.12e}")
            cols.append(f"{v.imag:.12e}")
        lines.append(" ".join(cols))
    return "\n".join(lines) + "\n"


def resample_uniform(record: SParameterRecord, n: int = N_POINTS,
                     fmin: float = FMIN_HZ, fmax: float = FMAX_HZ) -> SParameterRecord:
    """Resample onto n uniform points in [fmin, fmax] by linear interpolation.

    Real and imaginary parts are interpolated independently; extrapolation
    is refused.
    """
    if n < 2:
        raise ValidationError("need n >= 2 resample points")
    if fmin >= fmax:
        raise ValidationError("fmin must be < fmax")
    if fmin < record.frequencies[0] - 1e-9 or fmax > record.frequencies[-1] + 1e-9:
        raise ValidationError(
            f"requested range [{fmin}, {fmax}] outside data range "
            f"[{record.frequencies[0]}, {record.frequencies[-1]}]")
    grid = np.linspace(fmin, fmax, n)
    out = np.empty((n, 2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            re = np.interp(grid, record.frequencies, record.s[:, i, j].real)
            im = np.interp(grid, record.frequencies, record.s[:, i, j].imag)
            out[:, i, j] = re + 1j * im
    return SParameterRecord(frequencies=grid, s=out, metadata=record.metadata)


def to_feature_tensor(record: SParameterRecord, n_points: int = N_POINTS) -> FeatureTensor:
    """Stack Re/Im of all four S-parameters into the [8, 1002] network input.

    Channel order: Re s11, Im s11, Re s12, Im s12, Re s21, Im s21,
    Re s22, Im s22. No amplitude normalization is applied.
    """
    if len(record) != n_points:
        raise ShapeError(f"record has {len(record)} points, expected {n_points}; "
                         "resample_uniform first")
    v = np.empty((FEATURE_CHANNELS, n_points))
    for c, entry in enumerate((record.s11, record.s12, record.s21, record.s22)):
        v[2 * c] = entry.real
        v[2 * c + 1] = entry.imag
    return FeatureTensor(values=v)


def s_to_t(m: SParameterMatrix) -> TMatrix:
    """Convert S to cascade form: T = (1/s21) [[s12 s21 - s11 s22, s11], [-s22, 1]]."""
    if m.s21 == 0:
        raise SingularMatrixError("s21 is zero; no cascade representation")
    inv = 1.0 / m.s21
    return TMatrix(t11=(m.s12 * m.s21 - m.s11 * m.s22) * inv, t12=m.s11 * inv,
                   t21=-m.s22 * inv, t22=inv)


def t_to_s(t: TMatrix) -> SParameterMatrix:
    """Invert s_to_t; requires t22 != 0."""
    if t.t22 == 0:
        raise SingularMatrixError("t22 is zero; cannot convert back to S-parameters")
    s21 = 1.0 / t.t22
    s11 = t.t12 / t.t22
    s22 = -t.t21 / t.t22
    s12 = t.t11 - t.t12 * t.t21 / t.t22
    return SParameterMatrix(s11=s11, s12=s12, s21=s21, s22=s22)


def record_to_tmatrices(record: SParameterRecord) -> np.ndarray:
    """Vectorized s_to_t over a record; returns complex [n, 2, 2]."""
    s21 = record.s[:, 1, 0]
    bad = np.nonzero(s21 == 0)[0]
    if bad.size:
        raise SingularMatrixError(f"s21 is zero at frequency index {bad[0]}")
    t = np.empty_like(record.s)
    t[:, 0, 0] = record.s[:, 0, 1] * s21 - record.s[:, 0, 0] * record.s[:, 1, 1]
    t[:, 0, 1] = record.s[:, 0, 0]
    t[:, 1, 0] = -record.s[:, 1, 1]
    t[:, 1, 1] = 1.0
    return t / s21[:, None, None]


def tmatrices_to_s(t: np.ndarray) -> np.ndarray:
    """Vectorized t_to_s; input and output are complex [n, 2, 2]."""
    t22 = t[:, 1, 1]
    bad = np.nonzero(t22 == 0)[0]
    if bad.size:
        raise SingularMatrixError(f"t22 is zero at frequency index {bad[0]}")
    s = np.empty_like(t)
    s[:, 0, 0] = t[:, 0, 1] / t22
    s[:, 1, 0] = 1.0 / t22
    s[:, 1, 1] = -t[:, 1, 0] / t22
    s[:, 0, 1] = t[:, 0, 0] - t[:, 0, 1] * t[:, 1, 0] / t22
    return s
