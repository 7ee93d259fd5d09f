# Copyright (c) 2024 The koopman-uq Authors
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
import argparse
import logging
import sys

import pydevd

from koopman_uq import consts
from koopman_uq.cli import commands
from koopman_uq.exceptions import KoopmanUQError

FORMAT = '%(levelname)s %(asctime)-15s %(filename)s %(lineno)d %(message)s'
logger = logging.getLogger('koopman_uq')


def _add_config_flags(parser):
    parser.add_argument('-c', '--config',
                        help='JSON or YAML run config, flags override it')
    parser.add_argument('-d', '--dataset', help='KTS1 dataset file')
    parser.add_argument('-o', '--output-dir', dest='output_dir')
    parser.add_argument('--regime', choices=consts.REGIMES)
    parser.add_argument('--lambda', dest='lam', type=float,
                        help='diversity weight, in [0, 1] unless '
                             '--allow-divergent')
    parser.add_argument('--alpha', type=float)
    parser.add_argument('-M', '--ensemble-size', dest='ensemble_size',
                        type=int)
    parser.add_argument('--latent-dim', dest='latent_dim', type=int)
    parser.add_argument('--hidden', type=int, nargs='+',
                        help='hidden layer widths')
    parser.add_argument('--activation', choices=consts.ACTIVATIONS)
    parser.add_argument('--steps', type=int)
    parser.add_argument('--batch-size', dest='batch_size', type=int)
    parser.add_argument('--seed', type=int)
    parser.add_argument('--lr', type=float)
    parser.add_argument('--horizon', type=int,
                        help='evaluation horizon H, defaults to T')
    parser.add_argument('--test-fraction', dest='test_fraction', type=float)
    parser.add_argument('--train-horizon', dest='train_horizon', type=int)
    parser.add_argument('--random-windows', dest='random_windows',
                        action='store_const', const=True)
    parser.add_argument('--allow-divergent', dest='allow_divergent',
                        action='store_const', const=True)
    parser.add_argument('--workers', type=int)
    parser.add_argument('--log-every', dest='log_every', type=int)
    parser.add_argument('--checkpoint-every', dest='checkpoint_every',
                        type=int)


def get_args(argv=None):
    parser = argparse.ArgumentParser(
        prog='koopman-uq',
        description='Koopman autoencoder ensembles with diversity-promoting '
                    'training')
    parser.add_argument(
        '-l', '--loglevel',
        help='Log Level <DEBUG|INFO|WARNING|ERROR> defaults to INFO',
        required=False, default='INFO')
    parser.add_argument('-f', '--logfile',
                        help='File to log to defaults to console',
                        required=False, default=None)
    parser.add_argument('-dh', '--debug-host', dest='debug_host',
                        help='remote debugging host IP')
    parser.add_argument('-dp', '--debug-port', dest='debug_port', default=5678,
                        help='the remote debugging port')
    subparsers = parser.add_subparsers(dest='command')
    subparsers.required = True

    gen = subparsers.add_parser('gen-data', help='generate a KTS1 dataset')
    gen.add_argument('--system', choices=consts.SYSTEMS,
                     default=consts.SYSTEM_DAMPED_OSCILLATOR)
    gen.add_argument('--param', action='append',
                     help='system parameter key=value, e.g. zeta=0.1')
    gen.add_argument('--n-series', dest='n_series', type=int,
                     default=consts.DATA_N_SERIES)
    gen.add_argument('--steps', type=int, default=consts.DATA_STEPS)
    gen.add_argument('--dt', type=float, default=consts.DATA_DT)
    gen.add_argument('--noise-std', dest='noise_std', type=float,
                     default=consts.DATA_NOISE_STD)
    gen.add_argument('--seed', type=int, default=consts.SEED)
    gen.add_argument('--noise-seed', dest='noise_seed', type=int)
    gen.add_argument('--init', choices=('uniform', 'normal'),
                     default='uniform')
    gen.add_argument('--init-scale', dest='init_scale', type=float,
                     default=1.0)
    gen.add_argument('-o', '--output', required=True)
    gen.set_defaults(func=commands.cmd_gen_data)

    train = subparsers.add_parser('train', help='train an ensemble')
    _add_config_flags(train)
    train.add_argument('--resume', help='checkpoint to resume from')
    train.set_defaults(func=commands.cmd_train)

    evaluate = subparsers.add_parser('evaluate', help='score a checkpoint')
    evaluate.add_argument('-k', '--checkpoint', required=True)
    evaluate.add_argument('-d', '--dataset', required=True)
    evaluate.add_argument('--horizon', type=int)
    evaluate.add_argument('--split', choices=('train', 'test', 'all'),
                          default='test')
    evaluate.add_argument('--test-fraction', dest='test_fraction',
                          type=float,
                          help='defaults to the value used in training')
    evaluate.add_argument('--bins', type=int,
                          default=consts.SPREAD_SKILL_BINS)
    evaluate.add_argument('--workers', type=int)
    evaluate.add_argument('-o', '--output-dir', dest='output_dir')
    evaluate.set_defaults(func=commands.cmd_evaluate)

    fcst = subparsers.add_parser('forecast', help='forecast one series')
    fcst.add_argument('-k', '--checkpoint', required=True)
    fcst.add_argument('-d', '--dataset', required=True)
    fcst.add_argument('-i', '--index', type=int, default=0)
    fcst.add_argument('--horizon', type=int)
    fcst.add_argument('--workers', type=int)
    fcst.add_argument('-o', '--output', required=True,
                      help='trajectory CSV')
    fcst.add_argument('--svg', help='optional band plot')
    fcst.set_defaults(func=commands.cmd_forecast)

    sweep = subparsers.add_parser('sweep', help='train and score a lambda '
                                                'sweep')
    _add_config_flags(sweep)
    sweep.add_argument('--lambdas', type=float, nargs='+')
    sweep.add_argument('--include-crps-proxy', dest='include_crps_proxy',
                       action='store_true')
    sweep.set_defaults(func=commands.cmd_sweep)
    return parser.parse_args(argv)


def main(argv=None):
    """
    :return: the process exit code
    """
    args = get_args(argv)

    # Setup remote debugging
    if args.debug_host:
        pydevd.settrace(host=args.debug_host, port=int(args.debug_port),
                        stdoutToServer=True, stderrToServer=True)
    numeric_level = getattr(logging, args.loglevel.upper(), None)
    if not isinstance(numeric_level, int):
        logger.error('Invalid log level - [%s]', args.loglevel)
        return consts.EXIT_USAGE

    if args.logfile:
        logging.basicConfig(format=FORMAT, level=numeric_level,
                            filename=args.logfile)
    else:
        logging.basicConfig(format=FORMAT, level=numeric_level)

    logger.info('Running [%s]', args.command)
    try:
        args.func(args)
    except KoopmanUQError as e:
        logger.error('[%s] failed - [%s]', args.command, e)
        print(str(e), file=sys.stderr)
        return e.exit_code
    except (IOError, OSError) as e:
        logger.error('[%s] failed - [%s]', args.command, e)
        print(str(e), file=sys.stderr)
        return consts.EXIT_DATA
    return consts.EXIT_OK


def run():
    sys.exit(main())


if __name__ == '__main__':
    run()
