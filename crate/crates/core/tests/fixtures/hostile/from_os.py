from os import system
system('touch /tmp/com_pwned')
