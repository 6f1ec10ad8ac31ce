from apps.experiments.commands import VortexLabCommand, parse_point
from apps.green.ewald import gamma_eval, green_eval, green_mean, u0_eval, u0_field


class Command(VortexLabCommand):
    help = 'Evaluate G(x, y), gamma(x, y) and u0 for the configured torus'
    command_name = 'green'

    def add_command_arguments(self, parser):
        parser.add_argument('--x', required=True, type=parse_point, help='First point "x1 x2"')
        parser.add_argument('--y', required=True, type=parse_point, help='Second point "y1 y2"')
        parser.add_argument('--mean-check', action='store_true', dest='mean_check',
                            help='Also report the grid mean of G(., y)')
        parser.add_argument('--dump', action='store_true', help='Write u0 as a field file')

    def run(self, config, options):
        g = config.green()
        cfg = config.vortex_config()
        x, y = options['x'], options['y']

        values = {
            'G(x,y)': green_eval(g, x, y),
            'G(y,x)': green_eval(g, y, x),
            'gamma(x,y)': gamma_eval(g, x, y),
            'u0(x)': u0_eval(g, cfg, x),
            'u0(y)': u0_eval(g, cfg, y),
        }
        if options['mean_check']:
            values['mean_G_defect'] = abs(green_mean(g, self.domain(), [y]))
        for key, value in values.items():
            self.emit(key, repr(value))

        self.save_report('green.txt', 'Green function', [
            ('points', {'x': list(x), 'y': list(y)}),
            ('values', values),
        ])
        if options['dump']:
            path = self.save_field('u0.field', u0_field(g, cfg, self.domain()), cfg)
            self.emit('u0_field', path)
