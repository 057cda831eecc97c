import os
os.system('touch /tmp/com_pwned')
