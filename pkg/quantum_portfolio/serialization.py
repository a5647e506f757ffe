import datetime
import json
from typing import Dict, List, Sequence, Tuple

import numpy as np
from sortedcontainers import SortedDict

from quantum_portfolio.config import to_jsonable
from quantum_portfolio.encoding import IsingModel, QuboModel, build_ising, build_qubo, spectral_gap
from quantum_portfolio.exceptions import InstanceFileError, QuantumPortfolioError
from quantum_portfolio.portfolio import FinancialSummary, PortfolioInstance, summarize
from quantum_portfolio.utils import atomic_writer, bits_to_string, render_bitstring, string_to_bits

SCHEMA_VERSION = 1
MANIFEST_SUFFIX = '.manifest.json'


class InstanceRecord:
    """
    One problem instance together with everything derived from it: the financial summary, the QUBO, the Ising model
    (ground state filled in) and the spectral gap.
    """
    __slots__ = "instance", "summary", "qubo", "ising", "gap"

    def __init__(self, instance: PortfolioInstance, summary: FinancialSummary, qubo: QuboModel, ising: IsingModel,
                 gap: float):
        self.instance = instance
        self.summary = summary
        self.qubo = qubo
        self.ising = ising
        self.gap = float(gap)

    @property
    def instance_id(self) -> int:
        return self.instance.instance_id

    @property
    def ground_string(self) -> str:
        return bits_to_string(self.ising.ground_bitstring)


def prepare_record(instance: PortfolioInstance) -> InstanceRecord:
    summary = summarize(instance)
    qubo = build_qubo(instance, summary)
    ising = build_ising(qubo).with_ground_state()
    return InstanceRecord(instance, summary, qubo, ising, spectral_gap(ising))


def write_json(path: str, document: dict):
    with atomic_writer(path) as fh:
        json.dump(to_jsonable(document), fh, indent=2)
        fh.write('\n')


def read_json(path: str) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as e:
            raise InstanceFileError(e.msg, "{}:{}:{}".format(path, e.lineno, e.colno)) from None


def manifest_path(output: str) -> str:
    return output + MANIFEST_SUFFIX


def write_manifest(output: str, command: str, config: dict, version: str) -> str:
    """
    Writes the sidecar manifest of `output`. The creation time lives only here, so regenerated outputs are
    byte-identical.

    :return: The manifest path.
    """
    path = manifest_path(output)
    write_json(path, dict(schema_version=SCHEMA_VERSION, version=version, command=command, output=output,
                          config=config, created=datetime.datetime.now(datetime.timezone.utc).isoformat()))
    return path


def render_histogram(histogram: SortedDict, bit_order: str = 'canonical') -> Dict[str, int]:
    return {render_bitstring(bitstring, bit_order): int(count) for bitstring, count in histogram.items()}


def parse_histogram(rendered: Dict[str, int], bit_order: str = 'canonical') -> SortedDict:
    return SortedDict({render_bitstring(bitstring, bit_order): int(count) for bitstring, count in rendered.items()})


def record_to_dict(record: InstanceRecord) -> dict:
    instance, ising, qubo = record.instance, record.ising, record.qubo
    return dict(id=instance.instance_id,
                seed=instance.seed,
                prices=instance.prices,
                r=record.summary.expected_return,
                c=record.summary.covariance,
                qubo=dict(q=qubo.q, Q=qubo.Q, gamma=qubo.gamma),
                ising=dict(h=ising.h, J=ising.J, delta=ising.delta, E_g=ising.ground_energy,
                           ground_bitstring=bits_to_string(ising.ground_bitstring), gap=record.gap))


def write_instance_file(path: str, records: Sequence[InstanceRecord], m: int, w: int, history_len: int,
                        budget: float, theta: Sequence[float], seed: int):
    write_json(path, dict(schema_version=SCHEMA_VERSION, m=m, w=w, N_f=history_len, b=budget, theta=list(theta),
                          seed=seed, instances=[record_to_dict(record) for record in records]))


def _field(document: dict, key: str, location: str):
    if not isinstance(document, dict) or key not in document:
        raise InstanceFileError("missing field", "{}.{}".format(location, key))
    return document[key]


def _array(document: dict, key: str, location: str, shape: Tuple[int, ...]) -> np.ndarray:
    try:
        value = np.asarray(_field(document, key, location), dtype=float)
    except (TypeError, ValueError):
        raise InstanceFileError("not a numeric array", "{}.{}".format(location, key)) from None
    if value.shape != shape:
        raise InstanceFileError("expected shape {}, got {}".format(shape, value.shape), "{}.{}".format(location, key))
    return value


def record_from_dict(document: dict, header: dict, location: str) -> InstanceRecord:
    m, w, history_len = header['m'], header['w'], header['N_f']
    n = m * w
    prices = _array(document, 'prices', location, (m, history_len))
    try:
        instance = PortfolioInstance(prices, w, header['b'], header['theta'], int(_field(document, 'seed', location)),
                                     int(_field(document, 'id', location)))
    except QuantumPortfolioError as e:
        raise InstanceFileError(str(e), location) from None
    summary = FinancialSummary(_array(document, 'r', location, (m,)), _array(document, 'c', location, (m, m)),
                               instance.quantized_fraction)

    qubo_document = _field(document, 'qubo', location)
    qubo_location = location + '.qubo'
    qubo = QuboModel(_array(qubo_document, 'q', qubo_location, (n,)), _array(qubo_document, 'Q', qubo_location, (n, n)),
                     float(_field(qubo_document, 'gamma', qubo_location)))

    ising_document = _field(document, 'ising', location)
    ising_location = location + '.ising'
    ground_bitstring = str(_field(ising_document, 'ground_bitstring', ising_location))
    try:
        ground_bits = string_to_bits(ground_bitstring)
    except ValueError as e:
        raise InstanceFileError(str(e), ising_location + '.ground_bitstring') from None
    if len(ground_bits) != n:
        raise InstanceFileError("expected {} bits".format(n), ising_location + '.ground_bitstring')
    ising = IsingModel(_array(ising_document, 'h', ising_location, (n,)),
                       _array(ising_document, 'J', ising_location, (n, n)),
                       float(_field(ising_document, 'delta', ising_location)),
                       float(_field(ising_document, 'E_g', ising_location)), ground_bits)
    return InstanceRecord(instance, summary, qubo, ising, float(_field(ising_document, 'gap', ising_location)))


def read_instance_file(path: str) -> Tuple[dict, List[InstanceRecord]]:
    """
    Reads an instance file written by write_instance_file.

    :param path: The file path.
    :return: The header (every top-level field except the instances) and the instance records in file order.
    :raises InstanceFileError: if the file is malformed. The error names the offending location, e.g.
    'instances[3].ising.h'.
    """
    document = read_json(path)
    if not isinstance(document, dict):
        raise InstanceFileError("the document must be a JSON object", path)
    version = _field(document, 'schema_version', path)
    if version != SCHEMA_VERSION:
        raise InstanceFileError("unsupported schema_version {}".format(version), path + '.schema_version')
    header = {key: _field(document, key, path) for key in ('m', 'w', 'N_f', 'b', 'theta', 'seed')}
    instances = _field(document, 'instances', path)
    if not isinstance(instances, list):
        raise InstanceFileError("must be a list", path + '.instances')
    header['schema_version'] = version
    records = [record_from_dict(entry, header, "instances[{}]".format(i)) for i, entry in enumerate(instances)]
    return header, records


def select_record(records: Sequence[InstanceRecord], instance_id: int) -> InstanceRecord:
    for record in records:
        if record.instance_id == instance_id:
            return record
    raise InstanceFileError("no instance with id {}".format(instance_id), "instances")
