"""
Train the distance regressor on a labeled dataset.

Writes the weight file, a per-epoch history CSV and, when enough records
are labeled, the geometric baseline calibration next to the weights.
"""
import csv
import io
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError

from core.baseline import MIN_CALIBRATION_RECORDS, calibrate_segments, save_calibration
from core.keypoints import parse_poses
from core.losses import DISTANCE_LOSSES
from core.management.commands._pipeline import PipelineCommand
from core.training import TrainingConfig, build_training_set, train
from core.weights import save_weights

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ['epoch', 'loss', 'distance_loss', 'val_loss', 'val_ale']


class Command(PipelineCommand):
    help = 'Train the pose-to-distance network (defaults: 200 epochs, Adam lr 1e-3, batch 512)'

    def add_command_arguments(self, parser):
        parser.add_argument('--data', default=None, help='Labeled JSON-lines dataset')
        parser.add_argument('--out', default=None, help='Weight file (default: settings WEIGHTS_PATH)')
        parser.add_argument('--history', default=None, help='History CSV (default: <out>.history.csv)')
        parser.add_argument('--calibration', default=None,
                            help='Baseline calibration file (default: <out>.calibration.json)')
        parser.add_argument('--epochs', type=int, default=None)
        parser.add_argument('--lr', dest='learning_rate', type=float, default=None)
        parser.add_argument('--batch-size', type=int, default=None)
        parser.add_argument('--p-drop', type=float, default=None, help='Dropout probability (default: 0.2)')
        parser.add_argument('--hidden-size', type=int, default=None, help='Units per hidden layer (default: 1024)')
        parser.add_argument('--loss', choices=DISTANCE_LOSSES, default=None,
                            help='Distance loss (default: laplace)')
        parser.add_argument('--dropout-regularizer', action='store_true', default=None,
                            help='Add the (1 - p) / 2N weight penalty')
        parser.add_argument('--val-fraction', type=float, default=None,
                            help='Held-out share tracked in the history (default: 0)')
        parser.add_argument('--flip', action='store_true', default=None,
                            help='Add horizontally mirrored copies of every record')

    def defaults(self):
        return {'out': settings.POSE_PROXEMICS['WEIGHTS_PATH'], 'flip': False}

    def run(self, **options):
        if not options.get('data'):
            raise CommandError("--data is required.")
        records = parse_poses(options['data'])
        dataset = build_training_set(records, flip=options['flip'])
        if len(dataset) == 0:
            raise CommandError(f"No usable labeled records in {options['data']}.")

        config = TrainingConfig.from_settings(
            epochs=options.get('epochs'),
            learning_rate=options.get('learning_rate'),
            batch_size=options.get('batch_size'),
            p_drop=options.get('p_drop'),
            hidden_size=options.get('hidden_size'),
            loss=options.get('loss'),
            dropout_regularizer=options.get('dropout_regularizer'),
            val_fraction=options.get('val_fraction'),
            seed=options['seed'],
        )
        result = train(dataset, config)

        out = Path(options['out'])
        save_weights(result.params, out)
        history_path = options.get('history') or str(out.with_suffix('.history.csv'))
        self.emit(self.history_csv(result.history, options['seed']), history_path)

        labeled = [r for r in records if r.gt is not None]
        if len(labeled) >= MIN_CALIBRATION_RECORDS:
            calibration_path = options.get('calibration') or str(out.with_suffix('.calibration.json'))
            save_calibration(calibrate_segments(labeled), calibration_path)
        else:
            logger.warning("Skipping baseline calibration: %d labeled records (need %d)",
                           len(labeled), MIN_CALIBRATION_RECORDS)

        if self.verbosity > 0:
            final = result.history[-1]
            self.stderr.write(f"Trained {config.epochs} epochs on {len(dataset)} samples; "
                              f"final loss {final['loss']:.4f}. Weights: {out}")

    @staticmethod
    def history_csv(history, seed):
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(HISTORY_COLUMNS + ['seed'])
        for entry in history:
            writer.writerow(['' if entry[c] is None else entry[c] for c in HISTORY_COLUMNS] + [seed])
        return buffer.getvalue()
