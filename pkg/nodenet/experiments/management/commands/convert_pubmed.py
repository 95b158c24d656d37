from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from citegraph.loaders import convert_pubmed
from core.exceptions import NodeNetError
from core.files import write_text_atomic


class Command(BaseCommand):
    help = 'Convert the PubMed-Diabetes tab files into pubmed.content and pubmed.cites'
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument('node_file', help='Pubmed-Diabetes.NODE.paper.tab')
        parser.add_argument('cites_file', help='Pubmed-Diabetes.DIRECTED.cites.tab')
        parser.add_argument('destination', help='Directory that receives pubmed.content and pubmed.cites')

    def handle(self, *args, **options):
        destination = Path(options['destination'])
        try:
            with open(options['node_file'], encoding='utf-8') as nodes, \
                    open(options['cites_file'], encoding='utf-8') as cites:
                content_text, cites_text = convert_pubmed(nodes, cites)
        except OSError as exc:
            raise CommandError(str(exc)) from exc
        except NodeNetError as exc:
            raise CommandError(str(exc)) from exc
        write_text_atomic(destination / 'pubmed.content', content_text)
        write_text_atomic(destination / 'pubmed.cites', cites_text)
        self.stdout.write(f"wrote {destination / 'pubmed.content'} and {destination / 'pubmed.cites'}")
