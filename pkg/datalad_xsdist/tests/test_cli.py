import pytest

from ..cli import (
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    _exit_code,
    build_parser,
    main,
)
from ..sobolev_hs import KernelTable


def _rows(text):
    # CSV lines without comments, header first
    return [ln.split(',') for ln in text.splitlines()
            if ln and not ln.startswith('#')]


def test_parser_knows_all_commands():
    parser = build_parser()
    for cmd in ('dist', 'dist-to-normal', 'kernel-table', 'oracle',
                'scan-geodesic', 'flow', 'train', 'generate'):
        ns = parser.parse_args([cmd] + {
            'dist': ['a.csv', 'b.csv'],
            'dist-to-normal': ['a.csv'],
            'oracle': ['sliced'],
            'generate': ['model.ckpt'],
        }.get(cmd, []))
        assert ns.subcommand == cmd
    # absent options take the defaults of the command signature
    ns = parser.parse_args(['flow', '--steps', '3'])
    assert ns.steps == '3'
    assert ns.particles == 256
    assert ns.fixed_step is False
    assert ns.output is None
    # result parameters are not exposed, the front end owns rendering
    assert not hasattr(ns, 'result_renderer')
    assert parser.parse_args(['flow', '--fixed-step']).fixed_step is True


def test_exit_codes():
    assert _exit_code(['ok']) == EXIT_OK
    assert _exit_code([]) == EXIT_OK
    assert _exit_code(['ok', 'error']) == EXIT_NUMERICAL
    assert _exit_code(['error', 'impossible']) == EXIT_USAGE


def test_dist(cloud_files, capsys):
    assert main(['dist', str(cloud_files['pair']),
                 str(cloud_files['origin'])]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith('#config ')
    assert _rows(out) == [['cross', 'self_a', 'self_b', 'total'],
                          ['1', '0.5', '0', '0.5']]


def test_dist_identical_and_missing(cloud_files, tmp_path, capsys):
    plane = str(cloud_files['plane'])
    assert main(['dist', plane, plane]) == EXIT_OK
    assert _rows(capsys.readouterr().out)[1][-1] == '0'
    assert main(['dist', plane, str(tmp_path / 'nothere.csv')]) == EXIT_USAGE
    assert 'xsdist dist' in capsys.readouterr().err
    # clouds of different dimension
    assert main(['dist', plane, str(cloud_files['pair'])]) == EXIT_USAGE


def test_dist_to_file(cloud_files, tmp_path, capsys):
    out = tmp_path / 'report.csv'
    assert main(['dist', '--kernel', 'hs:1', '-o', str(out),
                 str(cloud_files['pair']), str(cloud_files['origin'])]) \
        == EXIT_OK
    assert capsys.readouterr().out == ''
    header, row = _rows(out.read_text())
    assert header == ['cross', 'self_a', 'self_b', 'total']
    assert float(row[-1]) > 0


def test_dist_to_normal(cloud_files, capsys):
    assert main(['dist-to-normal', '--method', 'poisson',
                 str(cloud_files['origin'])]) == EXIT_OK
    header, row = _rows(capsys.readouterr().out)
    assert float(row[header.index('total')]) == pytest.approx(
        0.2336941, abs=1e-7)


@pytest.mark.parametrize("family", ["fig1", "rigid"])
def test_scan_geodesic(family, capsys):
    assert main(['scan-geodesic', '--family', family, '--tmin', '-1',
                 '--tmax', '1', '--steps', '5']) == EXIT_OK
    header, *rows = _rows(capsys.readouterr().out)
    assert header == ['t', 'w2sq', 'xs_sq']
    assert [float(r[1]) for r in rows] == pytest.approx(
        [4.0, 4.25, 5.0, 4.25, 4.0])
    assert main(['scan-geodesic', '--family', 'circle']) == EXIT_USAGE


def test_scan_geodesic_mixture(cloud_files, tmp_path, capsys):
    out = tmp_path / 'scan.csv'
    plane = str(cloud_files['plane'])
    assert main(['scan-geodesic', '--family', 'mixture', '--steps', '3',
                 '--mu0', plane, '--mu1', plane, '--nu', plane,
                 str(out)]) == EXIT_OK
    header, *rows = _rows(out.read_text())
    assert header == ['t', 'xs_sq', 'residual']
    assert len(rows) == 3
    # the mixture family needs all three clouds
    assert main(['scan-geodesic', '--family', 'mixture']) == EXIT_USAGE


def test_kernel_table(tmp_path):
    out = tmp_path / 'table.csv'
    assert main(['kernel-table', '--s', '1', '--amax', '5',
                 str(out)]) == EXIT_OK
    table = KernelTable.from_csv(out.read_text())
    assert len(table.grid) == 256
    assert table.radius_max == 5.0
    # charfn tables need a seed
    assert main(['kernel-table', '--method', 'charfn']) == EXIT_USAGE


def test_oracle(capsys):
    assert main(['oracle', 'dirac-normal', '--point', '3,4',
                 '--samples', '20000', '--seed', '1']) == EXIT_OK
    header, row = _rows(capsys.readouterr().out)
    assert header == ['estimator', 'value', 'std_error', 'n_samples',
                      'reference']
    value, err, ref = (float(row[i]) for i in (1, 2, 4))
    assert abs(value - ref) <= 4 * err
    assert main(['oracle', 'dirac-normal', '--point', '3,4']) == EXIT_USAGE
    assert main(['oracle', 'nonsense', '--seed', '1']) == EXIT_USAGE


def test_flow(tmp_path, capsys):
    particles = tmp_path / 'particles.csv'
    assert main(['flow', '--particles', '8', '--dim', '2', '--steps', '5',
                 '--seed', '3', '--particles-out', str(particles)]) == EXIT_OK
    header, *rows = _rows(capsys.readouterr().out)
    assert header == ['step', 'latent_loss']
    assert len(rows) == 6
    assert len(_rows(particles.read_text())) == 8
    assert main(['flow', '--steps', '5']) == EXIT_USAGE


def test_train_and_generate(tmp_path, capsys):
    ckpt = tmp_path / 'model.ckpt'
    report = tmp_path / 'train.csv'
    assert main(['train', '--samples', '64', '--epochs', '2',
                 '--batch-size', '32', '--hidden', '8', '--seed', '1',
                 '--checkpoint', str(ckpt), '-o', str(report)]) == EXIT_OK
    header, *rows = _rows(report.read_text())
    assert header == ['step', 'loss_rec', 'loss_lat', 'loss_global']
    assert [r[0] for r in rows] == ['0', '2', '4']
    assert main(['generate', str(ckpt), '--samples', '5',
                 '--seed', '2']) == EXIT_OK
    out = capsys.readouterr().out
    assert '# dim=2' in out
    assert len(_rows(out)) == 5


def test_usage_errors(capsys):
    assert main(['bogus']) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    assert main(['flow', '--threads', '0', '--seed', '1']) == EXIT_USAGE
