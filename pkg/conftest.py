import os
import sys

import django

sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'simulator'))
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'simulator.settings')
django.setup()
