# Utility modules for RSLab
