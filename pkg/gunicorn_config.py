import multiprocessing

# Gunicorn configuration for the prediction service.
# Each worker loads its own copy of the state named by ACIL_CONFIG.
bind = "0.0.0.0:10000"  # Render will override this with PORT env variable
workers = max(1, multiprocessing.cpu_count() // 2)
threads = 2
timeout = 60
worker_class = "sync"
loglevel = "info"
